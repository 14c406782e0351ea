//! Mean squared error over all entries of a prediction.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Returns the mean of squared residuals and its gradient with respect to
/// the prediction.
pub fn mse_loss(pred: &Array2<f64>, target: &Array2<f64>) -> Result<(f64, Array2<f64>)> {
    if pred.dim() != target.dim() {
        return Err(Error::shape(format!(
            "mse shapes {:?} vs {:?}",
            pred.dim(),
            target.dim()
        )));
    }
    let n = pred.len() as f64;
    let resid = pred - target;
    let loss = resid.mapv(|v| v * v).sum() / n;
    let grad = resid.mapv(|v| 2.0 * v / n);
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_when_equal() {
        let a = array![[1.0, 2.0], [3.0, 4.0]];
        let (loss, grad) = mse_loss(&a, &a).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn unit_residuals() {
        let pred = array![[0.0, 0.0]];
        let target = array![[1.0, 1.0]];
        let (loss, grad) = mse_loss(&pred, &target).unwrap();
        assert_eq!(loss, 1.0);
        assert!(grad.iter().all(|v| *v == -1.0));
    }

    #[test]
    fn shape_mismatch() {
        let a = array![[1.0]];
        let b = array![[1.0, 2.0]];
        assert!(mse_loss(&a, &b).is_err());
    }
}
