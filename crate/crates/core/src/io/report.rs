//! Result artifacts: CSV files for knockoff statistics, per-run metrics,
//! and cross-run selection frequencies. All writers are byte-stable given
//! identical inputs.

use std::path::Path;

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::io::table::format_full;
use crate::selection::{AggregateReport, EvalMetrics, SelectionReport};

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::data(format!("{}: {e}", path.display())))
}

/// One row per feature: W statistic, both thresholds, selection flags.
pub fn write_statistics_csv(
    feature_names: &[String],
    w: &Array1<f64>,
    report: &SelectionReport,
    path: &Path,
) -> Result<()> {
    if feature_names.len() != w.len() {
        return Err(Error::shape("feature name count mismatch".to_string()));
    }
    let mut writer = csv_writer(path)?;
    writer
        .write_record(["feature", "w", "selected", "selected_plus"])
        .map_err(|e| Error::data(e.to_string()))?;
    for (j, name) in feature_names.iter().enumerate() {
        writer
            .write_record([
                name.as_str(),
                &format_full(w[j]),
                if report.selected.contains(&j) { "1" } else { "0" },
                if report.selected_plus.contains(&j) { "1" } else { "0" },
            ])
            .map_err(|e| Error::data(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

/// One row per run with FDP/TPP under both thresholds.
pub fn write_metrics_csv(
    metrics: &[(EvalMetrics, EvalMetrics)],
    path: &Path,
) -> Result<()> {
    let mut writer = csv_writer(path)?;
    writer
        .write_record([
            "run",
            "fdp",
            "tpp",
            "selected",
            "fdp_plus",
            "tpp_plus",
            "selected_plus",
        ])
        .map_err(|e| Error::data(e.to_string()))?;
    for (run, (m, mp)) in metrics.iter().enumerate() {
        writer
            .write_record([
                run.to_string(),
                format_full(m.fdp),
                format_full(m.tpp),
                m.selected.to_string(),
                format_full(mp.fdp),
                format_full(mp.tpp),
                mp.selected.to_string(),
            ])
            .map_err(|e| Error::data(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

/// One row per feature, sorted by descending selection frequency (ties
/// broken by feature index so output is deterministic).
pub fn write_frequency_csv(
    feature_names: &[String],
    aggregate: &AggregateReport,
    path: &Path,
) -> Result<()> {
    if feature_names.len() != aggregate.frequency.len() {
        return Err(Error::shape("feature name count mismatch".to_string()));
    }
    let mut order: Vec<usize> = (0..feature_names.len()).collect();
    order.sort_by(|a, b| {
        aggregate.frequency[*b]
            .partial_cmp(&aggregate.frequency[*a])
            .unwrap()
            .then(a.cmp(b))
    });
    let mut writer = csv_writer(path)?;
    writer
        .write_record(["feature", "frequency", "count", "runs"])
        .map_err(|e| Error::data(e.to_string()))?;
    for j in order {
        let count = (aggregate.frequency[j] * aggregate.runs as f64).round() as usize;
        writer
            .write_record([
                feature_names[j].as_str(),
                &format_full(aggregate.frequency[j]),
                &count.to_string(),
                &aggregate.runs.to_string(),
            ])
            .map_err(|e| Error::data(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selection::{aggregate_runs, evaluate, run_selection};
    use ndarray::array;

    #[test]
    fn statistics_csv_round_trip_flags() {
        let w = array![3.0, -1.0, 2.0, -2.0, 5.0];
        let report = run_selection(&w, 0.5).unwrap();
        let names: Vec<String> = (0..5).map(|j| format!("f{j}")).collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.csv");
        write_statistics_csv(&names, &w, &report, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("f0,3,1,1"));
        assert!(text.contains("f2,2,1,0"));
        assert!(text.contains("f1,-1,0,0"));
    }

    #[test]
    fn metrics_csv_is_deterministic() {
        let m = evaluate(&[0, 1], &[1], 4).unwrap();
        let rows = vec![(m, m), (m, m)];
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.csv");
        let p2 = dir.path().join("b.csv");
        write_metrics_csv(&rows, &p1).unwrap();
        write_metrics_csv(&rows, &p2).unwrap();
        assert_eq!(std::fs::read(p1).unwrap(), std::fs::read(p2).unwrap());
    }

    #[test]
    fn frequency_csv_sorted_descending() {
        let agg = aggregate_runs(&[vec![2], vec![2, 0]], &[2], 3).unwrap();
        let names = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("freq.csv");
        write_frequency_csv(&names, &agg, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "c,1,2,2");
        assert_eq!(lines[2], "a,0.5,1,2");
        assert_eq!(lines[3], "b,0,0,2");
    }

    #[test]
    fn empty_selection_still_writes_valid_file() {
        let w = array![-1.0, -2.0];
        let report = run_selection(&w, 0.2).unwrap();
        let names = vec!["a".to_string(), "b".to_string()];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.csv");
        write_statistics_csv(&names, &w, &report, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.contains("a,-1,0,0"));
    }
}
