//! The subjects x time x features data array plus optional responses.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Rectangular longitudinal data: `m` subjects, each with an `n x p` feature
/// matrix and optionally a length-`n` response vector.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesPanel {
    pub subject_ids: Vec<String>,
    pub feature_names: Vec<String>,
    pub x: Vec<Array2<f64>>,
    pub y: Option<Vec<Array1<f64>>>,
}

impl TimeSeriesPanel {
    pub fn new(
        subject_ids: Vec<String>,
        feature_names: Vec<String>,
        x: Vec<Array2<f64>>,
        y: Option<Vec<Array1<f64>>>,
    ) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::data("panel has no subjects".to_string()));
        }
        if subject_ids.len() != x.len() {
            return Err(Error::shape("subject id count != subject count".to_string()));
        }
        let (n, p) = x[0].dim();
        if feature_names.len() != p {
            return Err(Error::shape("feature name count != feature count".to_string()));
        }
        for xi in &x {
            if xi.dim() != (n, p) {
                return Err(Error::shape("panel is not rectangular".to_string()));
            }
        }
        if let Some(ys) = &y {
            if ys.len() != x.len() {
                return Err(Error::shape("response count != subject count".to_string()));
            }
            for yi in ys {
                if yi.len() != n {
                    return Err(Error::shape("response length != time points".to_string()));
                }
            }
        }
        Ok(TimeSeriesPanel {
            subject_ids,
            feature_names,
            x,
            y,
        })
    }

    pub fn subjects(&self) -> usize {
        self.x.len()
    }

    pub fn time_points(&self) -> usize {
        self.x[0].nrows()
    }

    pub fn features(&self) -> usize {
        self.x[0].ncols()
    }

    pub fn all_finite(&self) -> bool {
        let x_ok = self.x.iter().all(|xi| xi.iter().all(|v| v.is_finite()));
        let y_ok = self
            .y
            .as_ref()
            .map(|ys| ys.iter().all(|yi| yi.iter().all(|v| v.is_finite())))
            .unwrap_or(true);
        x_ok && y_ok
    }

    pub fn responses(&self) -> Result<&[Array1<f64>]> {
        self.y
            .as_deref()
            .ok_or_else(|| Error::data("panel has no response attached".to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_ragged_panels() {
        let x = vec![Array2::zeros((3, 2)), Array2::zeros((4, 2))];
        let ids = vec!["a".into(), "b".into()];
        let names = vec!["f1".into(), "f2".into()];
        assert!(TimeSeriesPanel::new(ids, names, x, None).is_err());
    }

    #[test]
    fn dims() {
        let x = vec![Array2::zeros((3, 2)); 4];
        let ids = (0..4).map(|i| format!("s{i}")).collect();
        let names = vec!["f1".into(), "f2".into()];
        let p = TimeSeriesPanel::new(ids, names, x, None).unwrap();
        assert_eq!((p.subjects(), p.time_points(), p.features()), (4, 3, 2));
    }
}
