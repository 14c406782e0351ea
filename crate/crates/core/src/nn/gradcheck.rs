//! Central finite-difference verification of analytic gradients.

use super::params::TensorSet;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Max relative error per parameter tensor, in enumeration order.
    pub per_tensor: Vec<(String, f64)>,
    pub max_rel_error: f64,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }

    /// Tensors whose max relative error exceeds the tolerance.
    pub fn flagged(&self) -> Vec<&str> {
        self.per_tensor
            .iter()
            .filter(|(_, e)| *e >= self.tolerance)
            .map(|(n, _)| n.as_str())
            .collect()
    }
}

/// Gradient entries smaller than this are compared on an absolute scale:
/// central differences at step h carry ~|loss| * eps / h of roundoff
/// (~1e-11 here), which would dominate a pure ratio for tiny entries.
const SCALE_FLOOR: f64 = 1e-4;

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(SCALE_FLOOR);
    (analytic - numeric).abs() / scale
}

/// Compares `analytic` gradients against central finite differences of
/// `loss` taken one parameter scalar at a time.
///
/// O(#params) loss evaluations; intended for small verification instances.
pub fn grad_check<M: TensorSet>(
    model: &mut M,
    analytic: &M,
    mut loss: impl FnMut(&M) -> f64,
    step: f64,
    tolerance: f64,
) -> GradCheckReport {
    let n_tensors = model.tensors().len();
    let mut per_tensor = Vec::with_capacity(n_tensors);
    let mut max_rel = 0.0f64;

    for ti in 0..n_tensors {
        let (name, len) = {
            let ts = model.tensors();
            (ts[ti].0.clone(), ts[ti].1.len())
        };
        let mut tensor_max = 0.0f64;
        for ei in 0..len {
            let original = read(model, ti, ei);
            write(model, ti, ei, original + step);
            let up = loss(model);
            write(model, ti, ei, original - step);
            let down = loss(model);
            write(model, ti, ei, original);

            let numeric = (up - down) / (2.0 * step);
            let a = analytic.tensors()[ti].1.as_slice().expect("standard layout")[ei];
            tensor_max = tensor_max.max(relative_error(a, numeric));
        }
        max_rel = max_rel.max(tensor_max);
        per_tensor.push((name, tensor_max));
    }

    GradCheckReport {
        per_tensor,
        max_rel_error: max_rel,
        tolerance,
    }
}

fn read<M: TensorSet>(model: &M, ti: usize, ei: usize) -> f64 {
    model.tensors()[ti].1.as_slice().expect("standard layout")[ei]
}

fn write<M: TensorSet>(model: &mut M, ti: usize, ei: usize, v: f64) {
    model.tensors_mut()[ti].1.as_slice_mut().expect("standard layout")[ei] = v;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::dense::{dense_backward, dense_forward, DenseParams};
    use crate::nn::loss::mse_loss;
    use crate::nn::params::glorot;
    use crate::rng::master_rng;

    #[test]
    fn dense_layer_gradients_match() {
        let mut rng = master_rng(17);
        let x = glorot(6, 3, &mut rng);
        let target = glorot(6, 2, &mut rng);
        let mut p = DenseParams::new(3, 2, &mut rng);

        let out = dense_forward(&x, &p).unwrap();
        let (_, dout) = mse_loss(&out, &target).unwrap();
        let (grads, _) = dense_backward(&x, &dout, &p).unwrap();

        let report = grad_check(
            &mut p,
            &grads,
            |m| {
                let out = dense_forward(&x, m).unwrap();
                mse_loss(&out, &target).unwrap().0
            },
            1e-5,
            1e-7,
        );
        assert!(report.passed(), "max rel err {}", report.max_rel_error);
    }

    #[test]
    fn degenerate_zero_case_passes() {
        let x = ndarray::Array2::zeros((4, 3));
        let target = ndarray::Array2::zeros((4, 2));
        let mut p = DenseParams::zeros(3, 2);
        let out = dense_forward(&x, &p).unwrap();
        let (_, dout) = mse_loss(&out, &target).unwrap();
        let (grads, _) = dense_backward(&x, &dout, &p).unwrap();
        let report = grad_check(
            &mut p,
            &grads,
            |m| {
                let out = dense_forward(&x, m).unwrap();
                mse_loss(&out, &target).unwrap().0
            },
            1e-5,
            1e-7,
        );
        assert!(report.passed());
        assert!(report.flagged().is_empty());
    }
}
