//! Data-dependent thresholds for knockoff statistics, feature selection,
//! and evaluation against known ground truth.

use ndarray::Array1;

use crate::error::{Error, Result};

/// Candidate threshold grid: the distinct absolute values of the nonzero
/// statistics, ascending.
fn candidate_thresholds(w: &Array1<f64>) -> Vec<f64> {
    let mut mags: Vec<f64> = w.iter().map(|v| v.abs()).filter(|m| *m > 0.0).collect();
    mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
    mags.dedup();
    mags
}

fn validate_inputs(w: &Array1<f64>, q: f64) -> Result<()> {
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("non-finite knockoff statistic".to_string()));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::config(format!("target FDR q = {q} outside (0, 1)")));
    }
    Ok(())
}

fn threshold_with_offset(w: &Array1<f64>, q: f64, offset: f64) -> Result<f64> {
    validate_inputs(w, q)?;
    for t in candidate_thresholds(w) {
        let negatives = w.iter().filter(|v| **v <= -t).count() as f64;
        let positives = w.iter().filter(|v| **v >= t).count().max(1) as f64;
        if (negatives + offset) / positives <= q {
            return Ok(t);
        }
    }
    Ok(f64::INFINITY)
}

/// Knockoff threshold: smallest positive t with
/// `#{j : W_j <= -t} / max(#{j : W_j >= t}, 1) <= q`; infinity if none.
pub fn knockoff_threshold(w: &Array1<f64>, q: f64) -> Result<f64> {
    threshold_with_offset(w, q, 0.0)
}

/// Knockoff+ threshold: same with `1 + #{j : W_j <= -t}` in the numerator.
pub fn knockoff_plus_threshold(w: &Array1<f64>, q: f64) -> Result<f64> {
    threshold_with_offset(w, q, 1.0)
}

/// Indices with `W_j >= t`, ascending. An infinite threshold selects nothing.
pub fn select(w: &Array1<f64>, threshold: f64) -> Vec<usize> {
    if threshold.is_infinite() {
        return Vec::new();
    }
    w.iter()
        .enumerate()
        .filter(|(_, v)| **v >= threshold)
        .map(|(j, _)| j)
        .collect()
}

#[derive(Debug, Clone)]
pub struct SelectionReport {
    pub q: f64,
    pub threshold: f64,
    pub threshold_plus: f64,
    pub selected: Vec<usize>,
    pub selected_plus: Vec<usize>,
}

/// Applies both thresholds to one vector of statistics.
pub fn run_selection(w: &Array1<f64>, q: f64) -> Result<SelectionReport> {
    let threshold = knockoff_threshold(w, q)?;
    let threshold_plus = knockoff_plus_threshold(w, q)?;
    Ok(SelectionReport {
        q,
        threshold,
        threshold_plus,
        selected: select(w, threshold),
        selected_plus: select(w, threshold_plus),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalMetrics {
    /// False discovery proportion: false selections over max(|S|, 1).
    pub fdp: f64,
    /// True positive proportion: true selections over max(s, 1).
    pub tpp: f64,
    pub selected: usize,
    pub false_selections: usize,
}

/// Scores a selected set against the true signal support.
pub fn evaluate(selected: &[usize], signal: &[usize], p: usize) -> Result<EvalMetrics> {
    if selected.iter().chain(signal).any(|j| *j >= p) {
        return Err(Error::config(format!("feature index out of range 0..{p}")));
    }
    let is_signal: Vec<bool> = {
        let mut v = vec![false; p];
        for j in signal {
            v[*j] = true;
        }
        v
    };
    let true_selections = selected.iter().filter(|j| is_signal[**j]).count();
    let false_selections = selected.len() - true_selections;
    Ok(EvalMetrics {
        fdp: false_selections as f64 / selected.len().max(1) as f64,
        tpp: true_selections as f64 / signal.len().max(1) as f64,
        selected: selected.len(),
        false_selections,
    })
}

#[derive(Debug, Clone)]
pub struct AggregateReport {
    pub runs: usize,
    /// Mean false discovery proportion over runs (empirical FDR).
    pub fdr: f64,
    /// Mean true positive proportion over runs (empirical power).
    pub power: f64,
    /// Modified FDR: total false selections over total max(|S|, 1).
    pub mfdr: f64,
    pub mean_selected: f64,
    /// Per-feature selection frequency across runs.
    pub frequency: Vec<f64>,
}

/// Averages per-run metrics and tallies how often each feature is selected.
pub fn aggregate_runs(
    selections: &[Vec<usize>],
    signal: &[usize],
    p: usize,
) -> Result<AggregateReport> {
    if selections.is_empty() {
        return Err(Error::config("no runs to aggregate".to_string()));
    }
    let mut fdr = 0.0;
    let mut power = 0.0;
    let mut total_false = 0usize;
    let mut total_denominator = 0usize;
    let mut mean_selected = 0.0;
    let mut counts = vec![0usize; p];
    for sel in selections {
        let m = evaluate(sel, signal, p)?;
        fdr += m.fdp;
        power += m.tpp;
        total_false += m.false_selections;
        total_denominator += m.selected.max(1);
        mean_selected += m.selected as f64;
        for j in sel {
            counts[*j] += 1;
        }
    }
    let runs = selections.len();
    Ok(AggregateReport {
        runs,
        fdr: fdr / runs as f64,
        power: power / runs as f64,
        mfdr: total_false as f64 / total_denominator as f64,
        mean_selected: mean_selected / runs as f64,
        frequency: counts.iter().map(|c| *c as f64 / runs as f64).collect(),
    })
}
