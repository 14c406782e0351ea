//! Subcommand implementations. Every command validates its configuration,
//! writes a manifest of the resolved settings, and emits deterministic CSV
//! and SVG artifacts into the output directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use tsknock_core::io::table::format_full;
use tsknock_core::io::{
    load_panel, write_frequency_csv, write_metrics_csv, write_panel, write_statistics_csv,
};
use tsknock_core::knockoffs::generate_knockoffs;
use tsknock_core::pipeline::{rep_seed, run_pipeline, PipelineRun};
use tsknock_core::prediction::{
    importance_scores, knockoff_statistics, train_prediction_network,
};
use tsknock_core::selection::{aggregate_runs, evaluate, run_selection, EvalMetrics};
use tsknock_core::sim::{simulate, SimConfig};
use tsknock_core::{Error, Result, TimeSeriesPanel};

use crate::config::RunConfig;

/// Writes `manifest.json`: the command name plus every resolved setting,
/// sorted, so a run can be reproduced from this file alone.
fn write_manifest(
    command: &str,
    config: &RunConfig,
    extra: &[(&str, String)],
    out_dir: &Path,
) -> Result<()> {
    let mut entries: BTreeMap<String, String> = config.entries();
    entries.insert("command".to_string(), command.to_string());
    for (k, v) in extra {
        entries.insert((*k).to_string(), v.clone());
    }
    let mut text = String::from("{\n");
    let lines: Vec<String> = entries
        .iter()
        .map(|(k, v)| format!("  \"{}\": \"{}\"", k, v.replace('\\', "\\\\").replace('"', "\\\"")))
        .collect();
    text.push_str(&lines.join(",\n"));
    text.push_str("\n}\n");
    std::fs::write(out_dir.join("manifest.json"), text)?;
    Ok(())
}

fn ensure_out_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    Ok(())
}

/// Runs `f(0..items)` on up to `degree` worker threads, returning results in
/// index order. Each item owns its seeds, so order of execution is
/// irrelevant.
fn parallel_map<T, F>(items: usize, degree: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    if degree <= 1 || items <= 1 {
        return (0..items).map(&f).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<T>>>> =
        Mutex::new((0..items).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..degree.min(items) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= items {
                    break;
                }
                let r = f(i);
                results.lock().unwrap()[i] = Some(r);
            });
        }
    });
    results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("worker filled every slot"))
        .collect()
}

/// Ground truth attached to simulated runs: signal indices, or none when the
/// panel came from a file.
type RunOutcome = (PipelineRun, Option<Vec<usize>>);

fn single_rep(
    config: &RunConfig,
    panel: Option<&TimeSeriesPanel>,
    rep: usize,
) -> Result<RunOutcome> {
    let seed = rep_seed(config.seed, rep);
    let pipeline_config = config.pipeline_config().with_seed(seed);
    match panel {
        Some(panel) => Ok((run_pipeline(panel, &pipeline_config)?, None)),
        None => {
            let sim_config = SimConfig { seed, ..config.sim.clone() };
            let (panel, truth) = simulate(&sim_config)?;
            Ok((run_pipeline(&panel, &pipeline_config)?, Some(truth.signal_set)))
        }
    }
}

fn load_input_panel(path: &Path) -> Result<TimeSeriesPanel> {
    let panel = load_panel(path)?;
    if !panel.all_finite() {
        return Err(Error::data(format!(
            "{}: panel has missing values; filter and interpolate first",
            path.display()
        )));
    }
    Ok(panel)
}

fn feature_names_or_default(panel: Option<&TimeSeriesPanel>, p: usize) -> Vec<String> {
    match panel {
        Some(panel) => panel.feature_names.clone(),
        None => (0..p).map(|j| format!("feature_{j}")).collect(),
    }
}

/// `simulate`: write a synthetic panel plus its ground truth.
pub fn cmd_simulate(config: &RunConfig, out: &Path) -> Result<()> {
    config.validate()?;
    ensure_out_dir(out)?;
    let (panel, truth) = simulate(&config.sim)?;
    write_panel(&panel, &out.join("panel.csv"))?;
    let mut writer = csv::WriterLike::new(out.join("truth.csv"))?;
    writer.row(["feature", "beta", "signal"])?;
    for (j, name) in panel.feature_names.iter().enumerate() {
        writer.row([
            name.as_str(),
            &format_full(truth.beta[j]),
            if truth.signal_set.contains(&j) { "1" } else { "0" },
        ])?;
    }
    writer.finish()?;
    write_manifest("simulate", config, &[], out)?;
    Ok(())
}

/// `knockoffs`: train the autoencoder on a panel file and write the knockoff
/// panel plus the per-subject variance estimates.
pub fn cmd_knockoffs(config: &RunConfig, panel_path: &Path, out: &Path) -> Result<()> {
    config.validate()?;
    ensure_out_dir(out)?;
    let panel = load_input_panel(panel_path)?;
    let mut ae = config.pipeline_config().autoencoder;
    ae.seed = config.seed;
    let results = generate_knockoffs(&panel, &ae)?;
    let knock_panel = TimeSeriesPanel::new(
        panel.subject_ids.clone(),
        panel.feature_names.clone(),
        results.iter().map(|r| r.x_tilde.clone()).collect(),
        None,
    )?;
    write_panel(&knock_panel, &out.join("knockoffs.csv"))?;
    let mut writer = csv::WriterLike::new(out.join("variance.csv"))?;
    writer.row(["subject", "theta_hat"])?;
    for (id, r) in panel.subject_ids.iter().zip(&results) {
        writer.row([id.as_str(), &format_full(r.theta_hat)])?;
    }
    writer.finish()?;
    write_manifest(
        "knockoffs",
        config,
        &[("panel", panel_path.display().to_string())],
        out,
    )?;
    Ok(())
}

/// `select`: train the prediction network on a panel and a pre-computed
/// knockoff panel, then threshold the statistics.
pub fn cmd_select(
    config: &RunConfig,
    panel_path: &Path,
    knockoffs_path: &Path,
    out: &Path,
) -> Result<()> {
    config.validate()?;
    ensure_out_dir(out)?;
    let panel = load_input_panel(panel_path)?;
    let knockoffs = load_input_panel(knockoffs_path)?;
    if knockoffs.x.len() != panel.x.len()
        || knockoffs.features() != panel.features()
        || knockoffs.time_points() != panel.time_points()
    {
        return Err(Error::data("knockoff panel does not match the panel".to_string()));
    }
    let y = panel
        .y
        .as_ref()
        .ok_or_else(|| Error::data("panel has no response column".to_string()))?;
    let mut pred = config.pipeline_config().prediction;
    pred.seed = config.seed;
    let model = train_prediction_network(&panel.x, &knockoffs.x, y, &pred)?;
    let (z, z_tilde) = importance_scores(&model);
    let w = knockoff_statistics(&z, &z_tilde)?;
    let report = run_selection(&w, config.q)?;
    write_statistics_csv(&panel.feature_names, &w, &report, &out.join("statistics.csv"))?;
    write_manifest(
        "select",
        config,
        &[
            ("panel", panel_path.display().to_string()),
            ("knockoffs", knockoffs_path.display().to_string()),
            ("threshold", format_full(report.threshold)),
            ("threshold_plus", format_full(report.threshold_plus)),
        ],
        out,
    )?;
    Ok(())
}

fn metrics_pair(run: &PipelineRun, signal: &[usize], p: usize) -> Result<(EvalMetrics, EvalMetrics)> {
    Ok((
        evaluate(&run.selection.selected, signal, p)?,
        evaluate(&run.selection.selected_plus, signal, p)?,
    ))
}

/// `pipeline`: one end-to-end run on a panel file or freshly simulated data.
pub fn cmd_pipeline(config: &RunConfig, panel_path: Option<&Path>, out: &Path) -> Result<()> {
    config.validate()?;
    ensure_out_dir(out)?;
    let panel = panel_path.map(load_input_panel).transpose()?;
    let (run, signal) = single_rep(config, panel.as_ref(), 0)?;
    let p = run.w.len();
    let names = feature_names_or_default(panel.as_ref(), p);
    write_statistics_csv(&names, &run.w, &run.selection, &out.join("statistics.csv"))?;
    let mut extra = vec![
        ("threshold", format_full(run.selection.threshold)),
        ("threshold_plus", format_full(run.selection.threshold_plus)),
        ("selected", run.selection.selected.len().to_string()),
        ("selected_plus", run.selection.selected_plus.len().to_string()),
    ];
    if let Some(signal) = &signal {
        let (m, mp) = metrics_pair(&run, signal, p)?;
        write_metrics_csv(&[(m, mp)], &out.join("metrics.csv"))?;
        extra.push(("fdp_plus", format_full(mp.fdp)));
        extra.push(("tpp_plus", format_full(mp.tpp)));
    }
    if let Some(path) = panel_path {
        extra.push(("panel", path.display().to_string()));
    }
    tsknock_core::io::svg::write_histogram(
        "knockoff statistics",
        run.w.as_slice().unwrap(),
        20.min(p.max(2)),
        &out.join("statistics.svg"),
    )?;
    write_manifest("pipeline", config, &extra, out)?;
    Ok(())
}

/// `repeat`: R independent runs (fresh simulated panels, or repeated
/// knockoff draws on one fixed panel), aggregated into frequency and metric
/// reports.
pub fn cmd_repeat(config: &RunConfig, panel_path: Option<&Path>, out: &Path) -> Result<()> {
    config.validate()?;
    ensure_out_dir(out)?;
    let panel = panel_path.map(load_input_panel).transpose()?;
    let outcomes = parallel_map(config.repetitions, config.parallelism, |rep| {
        single_rep(config, panel.as_ref(), rep)
    })?;
    let p = outcomes[0].0.w.len();
    let names = feature_names_or_default(panel.as_ref(), p);

    let selections_plus: Vec<Vec<usize>> = outcomes
        .iter()
        .map(|(run, _)| run.selection.selected_plus.clone())
        .collect();
    // Frequencies are reported for the FDR-controlling (plus) threshold; the
    // signal set only matters for fdr/power, so pass an empty one when the
    // truth is unknown.
    let signal_union: Vec<usize> = outcomes
        .first()
        .and_then(|(_, s)| s.clone())
        .unwrap_or_default();
    let aggregate = aggregate_runs(&selections_plus, &signal_union, p)?;
    write_frequency_csv(&names, &aggregate, &out.join("frequency.csv"))?;

    let mut extra = vec![("mean_selected_plus", format_full(aggregate.mean_selected))];
    if outcomes.iter().all(|(_, s)| s.is_some()) {
        let metrics: Vec<(EvalMetrics, EvalMetrics)> = outcomes
            .iter()
            .map(|(run, signal)| metrics_pair(run, signal.as_ref().unwrap(), p))
            .collect::<Result<_>>()?;
        write_metrics_csv(&metrics, &out.join("metrics.csv"))?;
        let fdr_plus: f64 =
            metrics.iter().map(|(_, mp)| mp.fdp).sum::<f64>() / metrics.len() as f64;
        let power_plus: f64 =
            metrics.iter().map(|(_, mp)| mp.tpp).sum::<f64>() / metrics.len() as f64;
        extra.push(("fdr_plus", format_full(fdr_plus)));
        extra.push(("power_plus", format_full(power_plus)));
    }
    if let Some(path) = panel_path {
        extra.push(("panel", path.display().to_string()));
    }
    write_manifest("repeat", config, &extra, out)?;
    Ok(())
}

/// `sweep`: grid over training epochs and bottleneck widths, each cell
/// aggregated over the configured repetitions on simulated data.
pub fn cmd_sweep(
    config: &RunConfig,
    epochs_grid: &[usize],
    bottleneck_grid: &[usize],
    out: &Path,
) -> Result<()> {
    config.validate()?;
    if epochs_grid.is_empty() || bottleneck_grid.is_empty() {
        return Err(Error::config("sweep grids must be non-empty".to_string()));
    }
    ensure_out_dir(out)?;
    let cells: Vec<(usize, usize)> = bottleneck_grid
        .iter()
        .flat_map(|b| epochs_grid.iter().map(move |e| (*b, *e)))
        .collect();
    let results = parallel_map(cells.len(), config.parallelism, |idx| {
        let (bottleneck, epochs) = cells[idx];
        let mut cell_config = config.clone();
        cell_config.bottleneck = bottleneck;
        cell_config.epochs_autoencoder = epochs;
        cell_config.epochs_prediction = epochs;
        let mut fdr = 0.0;
        let mut power = 0.0;
        for rep in 0..config.repetitions {
            let (run, signal) = single_rep(&cell_config, None, rep)?;
            let signal = signal.expect("simulated runs carry ground truth");
            let (_, mp) = metrics_pair(&run, &signal, run.w.len())?;
            fdr += mp.fdp;
            power += mp.tpp;
        }
        let reps = config.repetitions as f64;
        Ok((fdr / reps, power / reps))
    })?;

    let mut writer = csv::WriterLike::new(out.join("sweep.csv"))?;
    writer.row(["bottleneck", "epochs", "fdr_plus", "power_plus"])?;
    for ((b, e), (fdr, power)) in cells.iter().zip(&results) {
        writer.row([
            b.to_string().as_str(),
            &e.to_string(),
            &format_full(*fdr),
            &format_full(*power),
        ])?;
    }
    writer.finish()?;

    let row_labels: Vec<String> = bottleneck_grid.iter().map(|b| b.to_string()).collect();
    let col_labels: Vec<String> = epochs_grid.iter().map(|e| e.to_string()).collect();
    let grid = |pick: fn(&(f64, f64)) -> f64| -> Vec<Vec<f64>> {
        bottleneck_grid
            .iter()
            .enumerate()
            .map(|(r, _)| {
                (0..epochs_grid.len())
                    .map(|c| pick(&results[r * epochs_grid.len() + c]))
                    .collect()
            })
            .collect()
    };
    tsknock_core::io::svg::write_heatmap(
        "empirical FDR (plus threshold)",
        &row_labels,
        &col_labels,
        &grid(|cell| cell.0),
        &out.join("fdr.svg"),
    )?;
    tsknock_core::io::svg::write_heatmap(
        "empirical power (plus threshold)",
        &row_labels,
        &col_labels,
        &grid(|cell| cell.1),
        &out.join("power.svg"),
    )?;
    write_manifest(
        "sweep",
        config,
        &[
            ("epochs_grid", join_usize(epochs_grid)),
            ("bottleneck_grid", join_usize(bottleneck_grid)),
        ],
        out,
    )?;
    Ok(())
}

fn join_usize(values: &[usize]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// `report`: re-render plots from an existing statistics CSV.
pub fn cmd_report(statistics_path: &Path, out: &Path) -> Result<()> {
    ensure_out_dir(out)?;
    let text = std::fs::read_to_string(statistics_path)
        .map_err(|e| Error::data(format!("{}: {e}", statistics_path.display())))?;
    let mut w = Vec::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        let field = line.split(',').nth(1).ok_or_else(|| {
            Error::data(format!(
                "{}:{}: expected feature,w,... row",
                statistics_path.display(),
                lineno + 1
            ))
        })?;
        let v: f64 = field.parse().map_err(|_| {
            Error::data(format!(
                "{}:{}: non-numeric w '{field}'",
                statistics_path.display(),
                lineno + 1
            ))
        })?;
        w.push(v);
    }
    if w.is_empty() {
        return Err(Error::data("statistics file has no data rows".to_string()));
    }
    tsknock_core::io::svg::write_histogram(
        "knockoff statistics",
        &w,
        20.min(w.len().max(2)),
        &out.join("statistics.svg"),
    )?;
    let x: Vec<f64> = (0..w.len()).map(|j| j as f64).collect();
    let mut sorted = w.clone();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    tsknock_core::io::svg::write_line_chart(
        "sorted knockoff statistics",
        &x,
        &[("w", sorted)],
        &out.join("sorted.svg"),
    )?;
    Ok(())
}

/// Tiny CSV writer shim over the std library so this crate does not need a
/// dependency for three straightforward files.
mod csv {
    use std::io::Write as _;
    use std::path::PathBuf;
    use tsknock_core::{Error, Result};

    pub struct WriterLike {
        path: PathBuf,
        buf: String,
    }

    impl WriterLike {
        pub fn new(path: PathBuf) -> Result<Self> {
            Ok(WriterLike {
                path,
                buf: String::new(),
            })
        }

        pub fn row<const N: usize>(&mut self, fields: [&str; N]) -> Result<()> {
            self.buf.push_str(&fields.join(","));
            self.buf.push('\n');
            Ok(())
        }

        pub fn finish(self) -> Result<()> {
            let mut f = std::fs::File::create(&self.path)
                .map_err(|e| Error::data(format!("{}: {e}", self.path.display())))?;
            f.write_all(self.buf.as_bytes())?;
            Ok(())
        }
    }
}

/// Parses a comma-separated list of positive integers for sweep grids.
pub fn parse_grid(raw: &str) -> Result<Vec<usize>> {
    let values: Vec<usize> = raw
        .split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| Error::config(format!("bad grid entry '{v}'")))
        })
        .collect::<Result<_>>()?;
    if values.is_empty() {
        return Err(Error::config("empty grid".to_string()));
    }
    Ok(values)
}

pub fn out_dir(out: &Option<PathBuf>) -> PathBuf {
    out.clone().unwrap_or_else(|| PathBuf::from("."))
}
