//! End-to-end tests of the tsknock binary: subcommand wiring, artifact
//! layout, determinism, config precedence, and the exit-code contract.

use std::path::Path;
use std::process::{Command, Output};

fn tsknock(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tsknock"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

const FAST: &[&str] = &[
    "--subjects",
    "1",
    "--time-points",
    "24",
    "--features",
    "6",
    "--signals",
    "2",
    "--epochs-autoencoder",
    "3",
    "--epochs-prediction",
    "3",
    "--bottleneck",
    "2",
    "--set",
    "dense_width=4",
    "--set",
    "lstm_units=4",
];

#[test]
fn simulate_writes_panel_and_truth() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    let mut args = vec!["simulate", "--seed", "3", "--out", out.to_str().unwrap()];
    args.extend_from_slice(FAST);
    assert_success(&tsknock(&args));
    let panel = read(&out.join("panel.csv"));
    assert!(panel.starts_with("subject,time,feature_0"));
    assert_eq!(panel.lines().count(), 1 + 24); // header + n rows for 1 subject
    let truth = read(&out.join("truth.csv"));
    assert_eq!(truth.lines().count(), 1 + 6);
    let signal_rows = truth.lines().filter(|l| l.ends_with(",1")).count();
    assert_eq!(signal_rows, 2);
    assert!(out.join("manifest.json").exists());
}

#[test]
fn knockoffs_then_select_chain() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let knock = dir.path().join("knock");
    let select = dir.path().join("select");
    let mut args = vec!["simulate", "--seed", "5", "--out", sim.to_str().unwrap()];
    args.extend_from_slice(FAST);
    assert_success(&tsknock(&args));

    let panel = sim.join("panel.csv");
    let mut args = vec![
        "knockoffs",
        "--seed",
        "5",
        "--panel",
        panel.to_str().unwrap(),
        "--out",
        knock.to_str().unwrap(),
    ];
    args.extend_from_slice(FAST);
    assert_success(&tsknock(&args));
    let variance = read(&knock.join("variance.csv"));
    assert!(variance.starts_with("subject,theta_hat"));

    let knock_panel = knock.join("knockoffs.csv");
    let mut args = vec![
        "select",
        "--seed",
        "5",
        "--panel",
        panel.to_str().unwrap(),
        "--knockoffs",
        knock_panel.to_str().unwrap(),
        "--out",
        select.to_str().unwrap(),
    ];
    args.extend_from_slice(FAST);
    assert_success(&tsknock(&args));
    let stats = read(&select.join("statistics.csv"));
    assert_eq!(stats.lines().count(), 1 + 6);
    assert!(stats.starts_with("feature,w,selected,selected_plus"));
}

#[test]
fn pipeline_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let mut args = vec!["pipeline", "--seed", "7", "--out", out.to_str().unwrap()];
        args.extend_from_slice(FAST);
        assert_success(&tsknock(&args));
    }
    for file in ["statistics.csv", "metrics.csv", "manifest.json", "statistics.svg"] {
        assert_eq!(
            std::fs::read(a.join(file)).unwrap(),
            std::fs::read(b.join(file)).unwrap(),
            "{file} differs between identical runs"
        );
    }
}

#[test]
fn repeat_aggregates_three_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rep");
    let mut args = vec![
        "repeat",
        "--seed",
        "11",
        "--repetitions",
        "3",
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(FAST);
    assert_success(&tsknock(&args));
    let metrics = read(&out.join("metrics.csv"));
    assert_eq!(metrics.lines().count(), 1 + 3);
    let freq = read(&out.join("frequency.csv"));
    assert_eq!(freq.lines().count(), 1 + 6);
    assert!(freq.lines().nth(1).unwrap().ends_with(",3") || freq.contains(",3\n"));
}

#[test]
fn sweep_emits_full_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let mut args = vec![
        "sweep",
        "--seed",
        "13",
        "--epochs-grid",
        "2,3",
        "--bottleneck-grid",
        "1,2",
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(FAST);
    assert_success(&tsknock(&args));
    let sweep = read(&out.join("sweep.csv"));
    assert_eq!(sweep.lines().count(), 1 + 4); // header + 2x2 grid
    assert!(sweep.starts_with("bottleneck,epochs,fdr_plus,power_plus"));
    assert!(out.join("fdr.svg").exists());
    assert!(out.join("power.svg").exists());
}

#[test]
fn report_renders_from_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let rep = dir.path().join("report");
    let mut args = vec!["pipeline", "--seed", "17", "--out", run.to_str().unwrap()];
    args.extend_from_slice(FAST);
    assert_success(&tsknock(&args));
    let stats = run.join("statistics.csv");
    assert_success(&tsknock(&[
        "report",
        "--statistics",
        stats.to_str().unwrap(),
        "--out",
        rep.to_str().unwrap(),
    ]));
    assert!(rep.join("statistics.svg").exists());
    assert!(rep.join("sorted.svg").exists());
}

#[test]
fn config_file_applies_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(
        &conf,
        "seed = 19\nfeatures = 5\nsignals = 1\ntime_points = 20\n\
         epochs_autoencoder = 2\nepochs_prediction = 2\nbottleneck = 2\n\
         dense_width = 4\nlstm_units = 4\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    assert_success(&tsknock(&[
        "pipeline",
        "--config",
        conf.to_str().unwrap(),
        "--features",
        "7",
        "--out",
        out.to_str().unwrap(),
    ]));
    let manifest = read(&out.join("manifest.json"));
    assert!(manifest.contains("\"features\": \"7\""), "{manifest}");
    assert!(manifest.contains("\"seed\": \"19\""));
}

#[test]
fn exit_codes_distinguish_failure_classes() {
    // Config error: q outside (0, 1).
    let out = tsknock(&["pipeline", "--q", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    // Config error: unknown key.
    let out = tsknock(&["pipeline", "--set", "nope=1"]);
    assert_eq!(out.status.code(), Some(2));
    // Data error: missing panel file.
    let out = tsknock(&["knockoffs", "--panel", "/nonexistent/panel.csv"]);
    assert_eq!(out.status.code(), Some(3));
}
