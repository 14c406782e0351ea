//! Batch normalization over the time dimension of one subject's sequence.

use ndarray::{Array1, Array2, Axis};

use super::params::{zeros, Matrix, TensorSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormParams {
    pub gamma: Matrix, // (k x 1)
    pub beta: Matrix,  // (k x 1)
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
    pub epsilon: f64,
    pub momentum: f64,
}

impl BatchNormParams {
    pub fn new(k: usize) -> Self {
        BatchNormParams {
            gamma: Matrix::ones((k, 1)),
            beta: zeros(k, 1),
            running_mean: Array1::zeros(k),
            running_var: Array1::ones(k),
            epsilon: 1e-5,
            momentum: 0.9,
        }
    }

    pub fn zeros_like(&self) -> Self {
        let k = self.gamma.nrows();
        BatchNormParams {
            gamma: zeros(k, 1),
            beta: zeros(k, 1),
            running_mean: Array1::zeros(k),
            running_var: Array1::zeros(k),
            epsilon: self.epsilon,
            momentum: self.momentum,
        }
    }

    pub fn width(&self) -> usize {
        self.gamma.nrows()
    }
}

impl TensorSet for BatchNormParams {
    fn tensors(&self) -> Vec<(String, &Matrix)> {
        vec![("gamma".to_string(), &self.gamma), ("beta".to_string(), &self.beta)]
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut Matrix)> {
        vec![("gamma".to_string(), &mut self.gamma), ("beta".to_string(), &mut self.beta)]
    }
}

/// Values cached by the training-mode forward pass.
#[derive(Debug, Clone)]
pub struct BatchNormCache {
    pub x_hat: Array2<f64>,
    pub mean: Array1<f64>,
    pub var: Array1<f64>,
    pub inv_std: Array1<f64>,
    pub batch_rows: usize,
}

/// Training-mode forward: normalizes each column by its batch statistics.
/// Running statistics are updated separately via [`update_running_stats`].
pub fn batchnorm_forward(
    x: &Array2<f64>,
    params: &BatchNormParams,
) -> Result<(Array2<f64>, BatchNormCache)> {
    let k = params.width();
    if x.ncols() != k {
        return Err(Error::shape(format!(
            "batchnorm width {} != {}",
            x.ncols(),
            k
        )));
    }
    let mean = x.mean_axis(Axis(0)).expect("non-empty batch");
    let centered = x - &mean;
    let var = centered.mapv(|v| v * v).mean_axis(Axis(0)).unwrap();
    let inv_std = var.mapv(|v| 1.0 / (v + params.epsilon).sqrt());
    let x_hat = &centered * &inv_std;
    let mut out = &x_hat * &params.gamma.column(0);
    out += &params.beta.column(0);

    let batch_rows = x.nrows();
    Ok((
        out,
        BatchNormCache {
            x_hat,
            mean,
            var,
            inv_std,
            batch_rows,
        },
    ))
}

/// Folds one batch's statistics into the running estimates.
pub fn update_running_stats(params: &mut BatchNormParams, cache: &BatchNormCache) {
    let m = params.momentum;
    let n = cache.batch_rows as f64;
    params.running_mean = &params.running_mean * m + &(&cache.mean * (1.0 - m));
    let unbiased = if n > 1.0 {
        &cache.var * (n / (n - 1.0))
    } else {
        cache.var.clone()
    };
    params.running_var = &params.running_var * m + &(&unbiased * (1.0 - m));
}

/// Inference-mode forward using running statistics.
pub fn batchnorm_inference(x: &Array2<f64>, params: &BatchNormParams) -> Result<Array2<f64>> {
    if x.ncols() != params.width() {
        return Err(Error::shape("batchnorm width mismatch".to_string()));
    }
    let inv_std = params.running_var.mapv(|v| 1.0 / (v + params.epsilon).sqrt());
    let x_hat = (x - &params.running_mean) * &inv_std;
    let mut out = &x_hat * &params.gamma.column(0);
    out += &params.beta.column(0);
    Ok(out)
}

/// Backward pass for the training-mode forward. Returns (param grads, dx).
pub fn batchnorm_backward(
    upstream: &Array2<f64>,
    cache: &BatchNormCache,
    params: &BatchNormParams,
) -> Result<(BatchNormParams, Array2<f64>)> {
    if upstream.dim() != cache.x_hat.dim() {
        return Err(Error::shape("batchnorm upstream shape mismatch".to_string()));
    }
    let n = upstream.nrows() as f64;
    let mut g = params.zeros_like();
    g.gamma
        .column_mut(0)
        .assign(&(upstream * &cache.x_hat).sum_axis(Axis(0)));
    g.beta.column_mut(0).assign(&upstream.sum_axis(Axis(0)));

    let dx_hat = upstream * &params.gamma.column(0);
    let sum_dx_hat = dx_hat.sum_axis(Axis(0));
    let sum_dx_hat_xhat = (&dx_hat * &cache.x_hat).sum_axis(Axis(0));
    // dx = inv_std/n * (n*dx_hat - sum(dx_hat) - x_hat * sum(dx_hat*x_hat))
    let dx = (&(&dx_hat * n) - &sum_dx_hat - &(&cache.x_hat * &sum_dx_hat_xhat))
        * &cache.inv_std.mapv(|v| v / n);
    Ok((g, dx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_batch_outputs_beta() {
        let mut p = BatchNormParams::new(3);
        p.beta.mapv_inplace(|_| 0.7);
        let x = Array2::from_elem((6, 3), 4.2);
        let (y, _) = batchnorm_forward(&x, &p).unwrap();
        for v in &y {
            assert_abs_diff_eq!(*v, 0.7, epsilon = 1e-9);
        }
    }

    #[test]
    fn normalized_columns_have_zero_mean_unit_variance() {
        let p = BatchNormParams::new(2);
        let x = ndarray::array![[1.0, 10.0], [2.0, 20.0], [3.0, 30.0], [4.0, 40.0]];
        let (y, _) = batchnorm_forward(&x, &p).unwrap();
        for j in 0..2 {
            let col = y.column(j);
            let mean: f64 = col.iter().sum::<f64>() / 4.0;
            assert_abs_diff_eq!(mean, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn inference_uses_running_stats() {
        let mut p = BatchNormParams::new(1);
        p.running_mean[0] = 2.0;
        p.running_var[0] = 4.0;
        p.epsilon = 0.0;
        let x = ndarray::array![[4.0]];
        let y = batchnorm_inference(&x, &p).unwrap();
        assert_abs_diff_eq!(y[[0, 0]], 1.0, epsilon = 1e-12);
    }
}
