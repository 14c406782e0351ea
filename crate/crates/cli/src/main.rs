//! `tsknock`: FDR-controlled feature selection for longitudinal panels.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
//! failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tsknock_core::Error;

use commands::{cmd_knockoffs, cmd_pipeline, cmd_repeat, cmd_report, cmd_select, cmd_simulate, cmd_sweep, out_dir, parse_grid};
use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "tsknock",
    version,
    about = "Feature selection on longitudinal panels with FDR control via knockoffs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Settings shared by all subcommands. Precedence: defaults, then the config
/// file, then explicit flags and --set assignments.
#[derive(Args)]
struct Common {
    /// Key=value config file ('#' comments allowed)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Extra key=value override (repeatable); accepts every config-file key
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    sets: Vec<String>,
    /// Master seed for data, knockoffs, and network initialization
    #[arg(long)]
    seed: Option<u64>,
    /// Target FDR level in (0, 1)
    #[arg(long)]
    q: Option<f64>,
    /// Autoencoder training epochs
    #[arg(long)]
    epochs_autoencoder: Option<usize>,
    /// Prediction-network training epochs
    #[arg(long)]
    epochs_prediction: Option<usize>,
    /// Autoencoder bottleneck width
    #[arg(long)]
    bottleneck: Option<usize>,
    /// Number of independent runs for repeat/sweep
    #[arg(long)]
    repetitions: Option<usize>,
    /// Worker threads (default from TSKNOCK_PARALLELISM, else 1)
    #[arg(long)]
    parallelism: Option<usize>,
    /// Simulated subjects
    #[arg(long)]
    subjects: Option<usize>,
    /// Simulated time points per subject
    #[arg(long)]
    time_points: Option<usize>,
    /// Simulated feature count
    #[arg(long)]
    features: Option<usize>,
    /// Simulated true-signal count
    #[arg(long)]
    signals: Option<usize>,
    /// Simulated signal amplitude
    #[arg(long)]
    amplitude: Option<f64>,
    /// Factor model: linear | logistic
    #[arg(long)]
    factor_model: Option<String>,
    /// Link function: linear | nonlinear
    #[arg(long)]
    link: Option<String>,
    /// Add the latent confounder to the simulated response
    #[arg(long)]
    confounders: bool,
    /// Output directory (default: current directory)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic panel with ground truth
    Simulate(Common),
    /// Train the autoencoder on a panel file and write a knockoff panel
    Knockoffs {
        #[command(flatten)]
        common: Common,
        /// Long-form panel CSV/TSV
        #[arg(long)]
        panel: PathBuf,
    },
    /// Train the prediction network on a panel plus knockoffs and select
    Select {
        #[command(flatten)]
        common: Common,
        /// Long-form panel CSV/TSV with a response column
        #[arg(long)]
        panel: PathBuf,
        /// Knockoff panel produced by the knockoffs command
        #[arg(long)]
        knockoffs: PathBuf,
    },
    /// End-to-end single run on a panel file or simulated data
    Pipeline {
        #[command(flatten)]
        common: Common,
        /// Long-form panel CSV/TSV with a response column; simulated when
        /// omitted
        #[arg(long)]
        panel: Option<PathBuf>,
    },
    /// Repeated independent runs with aggregated frequency/metric reports
    Repeat {
        #[command(flatten)]
        common: Common,
        /// Fixed panel to rerun; fresh simulated panels when omitted
        #[arg(long)]
        panel: Option<PathBuf>,
    },
    /// Grid over training epochs and bottleneck widths on simulated data
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated epoch grid, e.g. 100,1000
        #[arg(long, default_value = "100,1000")]
        epochs_grid: String,
        /// Comma-separated bottleneck grid, e.g. 1,15
        #[arg(long, default_value = "1,15")]
        bottleneck_grid: String,
    },
    /// Re-render plots from an existing statistics CSV
    Report {
        #[command(flatten)]
        common: Common,
        /// statistics.csv from a pipeline or select run
        #[arg(long)]
        statistics: PathBuf,
    },
}

fn resolve(common: &Common) -> tsknock_core::Result<RunConfig> {
    let mut config = RunConfig::default();
    if let Some(path) = &common.config {
        config.apply_file(path)?;
    }
    macro_rules! flag {
        ($field:ident, $key:literal) => {
            if let Some(v) = &common.$field {
                config.set($key, &v.to_string())?;
            }
        };
    }
    flag!(seed, "seed");
    flag!(q, "q");
    flag!(epochs_autoencoder, "epochs_autoencoder");
    flag!(epochs_prediction, "epochs_prediction");
    flag!(bottleneck, "bottleneck");
    flag!(repetitions, "repetitions");
    flag!(parallelism, "parallelism");
    flag!(subjects, "subjects");
    flag!(time_points, "time_points");
    flag!(features, "features");
    flag!(signals, "signals");
    flag!(amplitude, "amplitude");
    flag!(factor_model, "factor_model");
    flag!(link, "link");
    if common.confounders {
        config.set("confounders", "true")?;
    }
    for assignment in &common.sets {
        let (key, value) = assignment.split_once('=').ok_or_else(|| {
            Error::config(format!("--set expects key=value, got '{assignment}'"))
        })?;
        config.set(key.trim(), value.trim())?;
    }
    Ok(config)
}

fn run(cli: Cli) -> tsknock_core::Result<()> {
    match &cli.command {
        Command::Simulate(common) => cmd_simulate(&resolve(common)?, &out_dir(&common.out)),
        Command::Knockoffs { common, panel } => {
            cmd_knockoffs(&resolve(common)?, panel, &out_dir(&common.out))
        }
        Command::Select {
            common,
            panel,
            knockoffs,
        } => cmd_select(&resolve(common)?, panel, knockoffs, &out_dir(&common.out)),
        Command::Pipeline { common, panel } => {
            cmd_pipeline(&resolve(common)?, panel.as_deref(), &out_dir(&common.out))
        }
        Command::Repeat { common, panel } => {
            cmd_repeat(&resolve(common)?, panel.as_deref(), &out_dir(&common.out))
        }
        Command::Sweep {
            common,
            epochs_grid,
            bottleneck_grid,
        } => cmd_sweep(
            &resolve(common)?,
            &parse_grid(epochs_grid)?,
            &parse_grid(bottleneck_grid)?,
            &out_dir(&common.out),
        ),
        Command::Report { common, statistics } => {
            cmd_report(statistics, &out_dir(&common.out))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(match err {
                Error::Config(_) => 2,
                Error::Data(_) | Error::Io(_) => 3,
                Error::Numeric(_) | Error::Shape(_) => 4,
            })
        }
    }
}
