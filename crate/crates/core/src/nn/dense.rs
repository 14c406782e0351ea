//! Affine layer applied independently to every time step.

use ndarray::{Array1, Array2, Axis};

use super::params::{glorot, zeros, Matrix, TensorSet};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Weights of a dense layer mapping `p_in`-wide rows to `k`-wide rows.
/// `w` is stored as (p_in x k) so that row j carries everything feature j
/// feeds into the next layer.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    pub w: Matrix,
    pub bias: Matrix, // (k x 1)
}

impl DenseParams {
    pub fn new(p_in: usize, k: usize, rng: &mut Rng) -> Self {
        DenseParams {
            w: glorot(p_in, k, rng),
            bias: zeros(k, 1),
        }
    }

    pub fn zeros(p_in: usize, k: usize) -> Self {
        DenseParams {
            w: zeros(p_in, k),
            bias: zeros(k, 1),
        }
    }

    pub fn zeros_like(&self) -> Self {
        DenseParams::zeros(self.w.nrows(), self.w.ncols())
    }

    pub fn input_width(&self) -> usize {
        self.w.nrows()
    }

    pub fn output_width(&self) -> usize {
        self.w.ncols()
    }
}

impl TensorSet for DenseParams {
    fn tensors(&self) -> Vec<(String, &Matrix)> {
        vec![("w".to_string(), &self.w), ("bias".to_string(), &self.bias)]
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut Matrix)> {
        vec![("w".to_string(), &mut self.w), ("bias".to_string(), &mut self.bias)]
    }
}

/// Row-wise affine map: `out = x_seq . w + bias`.
pub fn dense_forward(x_seq: &Array2<f64>, params: &DenseParams) -> Result<Array2<f64>> {
    if x_seq.ncols() != params.input_width() {
        return Err(Error::shape(format!(
            "dense input width {} != {}",
            x_seq.ncols(),
            params.input_width()
        )));
    }
    let mut out = x_seq.dot(&params.w);
    out += &params.bias.column(0);
    Ok(out)
}

/// Gradients of the dense layer given upstream gradients for every row.
/// Returns (parameter gradients, input gradients).
pub fn dense_backward(
    x_seq: &Array2<f64>,
    upstream: &Array2<f64>,
    params: &DenseParams,
) -> Result<(DenseParams, Array2<f64>)> {
    if upstream.dim() != (x_seq.nrows(), params.output_width()) {
        return Err(Error::shape(format!(
            "dense upstream shape {:?} != ({}, {})",
            upstream.dim(),
            x_seq.nrows(),
            params.output_width()
        )));
    }
    let mut g = params.zeros_like();
    g.w = x_seq.t().dot(upstream);
    g.bias
        .column_mut(0)
        .assign(&upstream.sum_axis(Axis(0)));
    let dx = upstream.dot(&params.w.t());
    Ok((g, dx))
}

/// Single-row convenience wrappers used by the statistics code and tests.
pub fn dense_forward_row(x: &Array1<f64>, params: &DenseParams) -> Result<Array1<f64>> {
    let x2 = x
        .view()
        .insert_axis(ndarray::Axis(0))
        .to_owned();
    Ok(dense_forward(&x2, params)?.row(0).to_owned())
}
