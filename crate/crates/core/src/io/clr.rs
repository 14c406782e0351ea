//! Centered log-ratio transforms for compositional count data, plus the
//! missingness filters and interpolation used to build rectangular panels.

use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::error::{Error, Result};
use crate::panel::TimeSeriesPanel;

#[derive(Debug, Clone)]
pub struct IngestConfig {
    /// Drop a subject when more than this fraction of its time points is
    /// missing.
    pub sample_missing_threshold: f64,
    /// Drop a feature absent (zero or missing) in more than this fraction of
    /// samples.
    pub feature_absence_threshold: f64,
    /// Added to every count before taking logs.
    pub pseudocount: f64,
    /// Feature to split off as the response (modified-CLR) instead of
    /// keeping it among the explanatory features.
    pub response_feature: Option<String>,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            sample_missing_threshold: 0.5,
            feature_absence_threshold: 0.9,
            pseudocount: 0.5,
            response_feature: None,
        }
    }
}

impl IngestConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sample_missing_threshold", self.sample_missing_threshold),
            ("feature_absence_threshold", self.feature_absence_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if self.pseudocount <= 0.0 {
            return Err(Error::config(format!(
                "pseudocount must be positive, got {}",
                self.pseudocount
            )));
        }
        Ok(())
    }
}

/// CLR: `ln(x_i + pseudocount) - mean_j ln(x_j + pseudocount)`.
/// Output sums to zero.
pub fn clr_transform(counts: ArrayView1<f64>, pseudocount: f64) -> Result<Array1<f64>> {
    if counts.is_empty() {
        return Err(Error::data("empty composition".to_string()));
    }
    if counts.iter().any(|v| *v < 0.0 || !v.is_finite()) {
        return Err(Error::data("counts must be finite and nonnegative".to_string()));
    }
    if pseudocount < 0.0 || (pseudocount == 0.0 && counts.iter().any(|v| *v == 0.0)) {
        return Err(Error::data(
            "zero count with zero pseudocount has no logarithm".to_string(),
        ));
    }
    let logs = counts.mapv(|v| (v + pseudocount).ln());
    let mean = logs.mean().unwrap();
    Ok(logs - mean)
}

/// Modified CLR for the response: `ln(y + pc) - mean_j ln(x_j + pc)` with the
/// centering taken over the explanatory features only.
pub fn modified_clr_response(
    y_count: f64,
    explanatory_counts: ArrayView1<f64>,
    pseudocount: f64,
) -> Result<f64> {
    if y_count < 0.0 || !y_count.is_finite() {
        return Err(Error::data("response count must be finite and nonnegative".to_string()));
    }
    if explanatory_counts.is_empty() {
        return Err(Error::data("empty explanatory composition".to_string()));
    }
    if pseudocount < 0.0
        || (pseudocount == 0.0
            && (y_count == 0.0 || explanatory_counts.iter().any(|v| *v == 0.0)))
    {
        return Err(Error::data(
            "zero count with zero pseudocount has no logarithm".to_string(),
        ));
    }
    let mean = explanatory_counts
        .mapv(|v| (v + pseudocount).ln())
        .mean()
        .unwrap();
    Ok((y_count + pseudocount).ln() - mean)
}

#[derive(Debug, Clone)]
pub struct FilterReport {
    pub dropped_subjects: Vec<String>,
    pub dropped_features: Vec<String>,
}

fn missing(v: f64) -> bool {
    v.is_nan()
}

/// A time point is missing for a subject when every feature value is NaN.
fn subject_missing_fraction(x: &Array2<f64>) -> f64 {
    let missing_rows = x
        .axis_iter(Axis(0))
        .filter(|row| row.iter().all(|v| missing(*v)))
        .count();
    missing_rows as f64 / x.nrows() as f64
}

/// Drops subjects with too many missing time points, then features absent
/// (zero or missing) in too many of the remaining samples. Idempotent.
pub fn filter_missing(
    panel: &TimeSeriesPanel,
    config: &IngestConfig,
) -> Result<(TimeSeriesPanel, FilterReport)> {
    config.validate()?;
    let mut kept_subjects = Vec::new();
    let mut dropped_subjects = Vec::new();
    for (i, id) in panel.subject_ids.iter().enumerate() {
        if subject_missing_fraction(&panel.x[i]) > config.sample_missing_threshold {
            dropped_subjects.push(id.clone());
        } else {
            kept_subjects.push(i);
        }
    }
    if kept_subjects.is_empty() {
        return Err(Error::data("all subjects dropped by missingness filter".to_string()));
    }

    let p = panel.features();
    let total_samples: usize = kept_subjects.len() * panel.time_points();
    let mut absent_counts = vec![0usize; p];
    for &i in &kept_subjects {
        for row in panel.x[i].axis_iter(Axis(0)) {
            for j in 0..p {
                if missing(row[j]) || row[j] == 0.0 {
                    absent_counts[j] += 1;
                }
            }
        }
    }
    let mut kept_features = Vec::new();
    let mut dropped_features = Vec::new();
    for (j, absent) in absent_counts.iter().enumerate() {
        let frac = *absent as f64 / total_samples as f64;
        if frac > config.feature_absence_threshold {
            dropped_features.push(panel.feature_names[j].clone());
        } else {
            kept_features.push(j);
        }
    }
    if kept_features.is_empty() {
        return Err(Error::data("all features dropped by absence filter".to_string()));
    }

    let x = kept_subjects
        .iter()
        .map(|&i| {
            let src = &panel.x[i];
            Array2::from_shape_fn((src.nrows(), kept_features.len()), |(t, jj)| {
                src[[t, kept_features[jj]]]
            })
        })
        .collect();
    let y = panel
        .y
        .as_ref()
        .map(|ys| kept_subjects.iter().map(|&i| ys[i].clone()).collect());
    let filtered = TimeSeriesPanel::new(
        kept_subjects
            .iter()
            .map(|&i| panel.subject_ids[i].clone())
            .collect(),
        kept_features
            .iter()
            .map(|&j| panel.feature_names[j].clone())
            .collect(),
        x,
        y,
    )?;
    Ok((
        filtered,
        FilterReport {
            dropped_subjects,
            dropped_features,
        },
    ))
}

/// Fills NaN gaps per subject and feature: interior gaps linearly
/// interpolated between the nearest observed values, leading/trailing gaps
/// carry the nearest observation. Errors when a whole column is missing.
pub fn interpolate_missing(panel: &TimeSeriesPanel) -> Result<TimeSeriesPanel> {
    let mut x = panel.x.clone();
    for (i, xm) in x.iter_mut().enumerate() {
        for j in 0..xm.ncols() {
            let col: Vec<f64> = xm.column(j).to_vec();
            let observed: Vec<usize> = (0..col.len()).filter(|t| !missing(col[*t])).collect();
            if observed.is_empty() {
                return Err(Error::data(format!(
                    "subject '{}' feature '{}' has no observed values",
                    panel.subject_ids[i], panel.feature_names[j]
                )));
            }
            for t in 0..col.len() {
                if !missing(col[t]) {
                    continue;
                }
                let next = observed.iter().find(|&&o| o > t);
                let prev = observed.iter().rev().find(|&&o| o < t);
                xm[[t, j]] = match (prev, next) {
                    (Some(&a), Some(&b)) => {
                        let w = (t - a) as f64 / (b - a) as f64;
                        col[a] + w * (col[b] - col[a])
                    }
                    (Some(&a), None) => col[a],
                    (None, Some(&b)) => col[b],
                    (None, None) => unreachable!(),
                };
            }
        }
    }
    TimeSeriesPanel::new(
        panel.subject_ids.clone(),
        panel.feature_names.clone(),
        x,
        panel.y.clone(),
    )
}

/// Full ingest: filter, interpolate, optionally split a response feature via
/// the modified CLR, then CLR-transform every remaining feature row.
pub fn ingest(panel: &TimeSeriesPanel, config: &IngestConfig) -> Result<(TimeSeriesPanel, FilterReport)> {
    config.validate()?;
    let (filtered, report) = filter_missing(panel, config)?;
    let filled = interpolate_missing(&filtered)?;

    let response_index = match &config.response_feature {
        Some(name) => Some(
            filled
                .feature_names
                .iter()
                .position(|f| f == name)
                .ok_or_else(|| {
                    Error::config(format!("response feature '{name}' not in panel"))
                })?,
        ),
        None => None,
    };
    let explanatory: Vec<usize> =
        (0..filled.features()).filter(|j| Some(*j) != response_index).collect();
    if explanatory.is_empty() {
        return Err(Error::data("no explanatory features left".to_string()));
    }

    let mut x_out = Vec::with_capacity(filled.subjects());
    let mut y_out = Vec::with_capacity(filled.subjects());
    for xm in &filled.x {
        let n = xm.nrows();
        let mut xt = Array2::zeros((n, explanatory.len()));
        let mut yt = Array1::zeros(n);
        for t in 0..n {
            let counts =
                Array1::from_iter(explanatory.iter().map(|&j| xm[[t, j]]));
            let transformed = clr_transform(counts.view(), config.pseudocount)?;
            xt.row_mut(t).assign(&transformed);
            if let Some(rj) = response_index {
                yt[t] = modified_clr_response(xm[[t, rj]], counts.view(), config.pseudocount)?;
            }
        }
        x_out.push(xt);
        y_out.push(yt);
    }
    let y = if response_index.is_some() {
        Some(y_out)
    } else {
        filled.y.clone()
    };
    let out = TimeSeriesPanel::new(
        filled.subject_ids.clone(),
        explanatory
            .iter()
            .map(|&j| filled.feature_names[j].clone())
            .collect(),
        x_out,
        y,
    )?;
    Ok((out, report))
}
