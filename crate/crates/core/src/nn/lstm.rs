//! LSTM layer with exact backpropagation through time.
//!
//! Gate algebra per step:
//!   f = sigmoid(Vf x + Uf h_prev + bf)
//!   i = sigmoid(Vi x + Ui h_prev + bi)
//!   cbar = tanh(Vc x + Uc h_prev + bc)
//!   c = f .* c_prev + i .* cbar
//!   o = sigmoid(Vo x + Uo h_prev + bo)
//!   h = o .* tanh(c)

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView1, Axis};

use super::params::{glorot, zeros, Matrix, TensorSet};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Weights of a single LSTM layer: input weights `v*` (u x k), recurrent
/// weights `u*` (u x u) and biases `b*` (u x 1), one triple per gate.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub vf: Matrix,
    pub vi: Matrix,
    pub vc: Matrix,
    pub vo: Matrix,
    pub uf: Matrix,
    pub ui: Matrix,
    pub uc: Matrix,
    pub uo: Matrix,
    pub bf: Matrix,
    pub bi: Matrix,
    pub bc: Matrix,
    pub bo: Matrix,
}

impl LstmParams {
    pub fn new(units: usize, input_width: usize, rng: &mut Rng) -> Self {
        let v = |rng: &mut Rng| glorot(units, input_width, rng);
        let u = |rng: &mut Rng| glorot(units, units, rng);
        LstmParams {
            vf: v(rng),
            vi: v(rng),
            vc: v(rng),
            vo: v(rng),
            uf: u(rng),
            ui: u(rng),
            uc: u(rng),
            uo: u(rng),
            bf: zeros(units, 1),
            bi: zeros(units, 1),
            bc: zeros(units, 1),
            bo: zeros(units, 1),
        }
    }

    pub fn zeros(units: usize, input_width: usize) -> Self {
        LstmParams {
            vf: zeros(units, input_width),
            vi: zeros(units, input_width),
            vc: zeros(units, input_width),
            vo: zeros(units, input_width),
            uf: zeros(units, units),
            ui: zeros(units, units),
            uc: zeros(units, units),
            uo: zeros(units, units),
            bf: zeros(units, 1),
            bi: zeros(units, 1),
            bc: zeros(units, 1),
            bo: zeros(units, 1),
        }
    }

    pub fn zeros_like(&self) -> Self {
        LstmParams::zeros(self.units(), self.input_width())
    }

    pub fn units(&self) -> usize {
        self.vf.nrows()
    }

    pub fn input_width(&self) -> usize {
        self.vf.ncols()
    }

    fn validate(&self) -> Result<()> {
        let u = self.units();
        let k = self.input_width();
        let vs = [&self.vf, &self.vi, &self.vc, &self.vo];
        let us = [&self.uf, &self.ui, &self.uc, &self.uo];
        let bs = [&self.bf, &self.bi, &self.bc, &self.bo];
        if vs.iter().any(|m| m.dim() != (u, k)) {
            return Err(Error::shape("inconsistent input weight shapes"));
        }
        if us.iter().any(|m| m.dim() != (u, u)) {
            return Err(Error::shape("inconsistent recurrent weight shapes"));
        }
        if bs.iter().any(|m| m.dim() != (u, 1)) {
            return Err(Error::shape("inconsistent bias shapes"));
        }
        Ok(())
    }
}

impl TensorSet for LstmParams {
    fn tensors(&self) -> Vec<(String, &Matrix)> {
        vec![
            ("vf".to_string(), &self.vf),
            ("vi".to_string(), &self.vi),
            ("vc".to_string(), &self.vc),
            ("vo".to_string(), &self.vo),
            ("uf".to_string(), &self.uf),
            ("ui".to_string(), &self.ui),
            ("uc".to_string(), &self.uc),
            ("uo".to_string(), &self.uo),
            ("bf".to_string(), &self.bf),
            ("bi".to_string(), &self.bi),
            ("bc".to_string(), &self.bc),
            ("bo".to_string(), &self.bo),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut Matrix)> {
        vec![
            ("vf".to_string(), &mut self.vf),
            ("vi".to_string(), &mut self.vi),
            ("vc".to_string(), &mut self.vc),
            ("vo".to_string(), &mut self.vo),
            ("uf".to_string(), &mut self.uf),
            ("ui".to_string(), &mut self.ui),
            ("uc".to_string(), &mut self.uc),
            ("uo".to_string(), &mut self.uo),
            ("bf".to_string(), &mut self.bf),
            ("bi".to_string(), &mut self.bi),
            ("bc".to_string(), &mut self.bc),
            ("bo".to_string(), &mut self.bo),
        ]
    }
}

/// Per-step activations retained for BPTT.
#[derive(Debug, Clone)]
pub struct StepCache {
    pub x: Array1<f64>,
    pub h_prev: Array1<f64>,
    pub c_prev: Array1<f64>,
    pub f: Array1<f64>,
    pub i: Array1<f64>,
    pub c_bar: Array1<f64>,
    pub o: Array1<f64>,
    pub c: Array1<f64>,
    pub tanh_c: Array1<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn gate(
    v: &Matrix,
    u: &Matrix,
    b: &Matrix,
    x: &ArrayView1<f64>,
    h_prev: &ArrayView1<f64>,
) -> Array1<f64> {
    let mut a = v.dot(x);
    a += &u.dot(h_prev);
    a += &b.column(0);
    a
}

/// One LSTM step. Returns the new hidden state, the new cell state and the
/// cache needed for the backward pass.
pub fn lstm_cell_forward(
    x: ArrayView1<f64>,
    h_prev: ArrayView1<f64>,
    c_prev: ArrayView1<f64>,
    params: &LstmParams,
) -> Result<(Array1<f64>, Array1<f64>, StepCache)> {
    params.validate()?;
    let u = params.units();
    let k = params.input_width();
    if x.len() != k {
        return Err(Error::shape(format!("input width {} != {}", x.len(), k)));
    }
    if h_prev.len() != u || c_prev.len() != u {
        return Err(Error::shape(format!(
            "state width {}/{} != {}",
            h_prev.len(),
            c_prev.len(),
            u
        )));
    }

    let f = gate(&params.vf, &params.uf, &params.bf, &x, &h_prev).mapv(sigmoid);
    let i = gate(&params.vi, &params.ui, &params.bi, &x, &h_prev).mapv(sigmoid);
    let c_bar = gate(&params.vc, &params.uc, &params.bc, &x, &h_prev).mapv(f64::tanh);
    let o = gate(&params.vo, &params.uo, &params.bo, &x, &h_prev).mapv(sigmoid);
    let c = &f * &c_prev + &i * &c_bar;
    let tanh_c = c.mapv(f64::tanh);
    let h = &o * &tanh_c;

    let cache = StepCache {
        x: x.to_owned(),
        h_prev: h_prev.to_owned(),
        c_prev: c_prev.to_owned(),
        f,
        i,
        c_bar,
        o,
        c: c.clone(),
        tanh_c,
    };
    Ok((h, c, cache))
}

/// Runs the cell over all rows of `x_seq` starting from `(h0, c0)`.
///
/// The caller owns the state contract: passing zeros at every subject
/// boundary keeps the layer stateless across batches.
pub fn lstm_sequence_forward(
    x_seq: &Array2<f64>,
    params: &LstmParams,
    h0: &Array1<f64>,
    c0: &Array1<f64>,
) -> Result<(Array2<f64>, Vec<StepCache>)> {
    params.validate()?;
    let n = x_seq.nrows();
    let u = params.units();
    if x_seq.ncols() != params.input_width() {
        return Err(Error::shape(format!(
            "sequence width {} != input width {}",
            x_seq.ncols(),
            params.input_width()
        )));
    }
    if h0.len() != u || c0.len() != u {
        return Err(Error::shape("initial state width mismatch"));
    }

    let mut h_seq = Array2::zeros((n, u));
    let mut caches = Vec::with_capacity(n);
    let mut h = h0.clone();
    let mut c = c0.clone();
    for t in 0..n {
        let (h_t, c_t, cache) = lstm_cell_forward(x_seq.row(t), h.view(), c.view(), params)?;
        h_seq.row_mut(t).assign(&h_t);
        caches.push(cache);
        h = h_t;
        c = c_t;
    }
    Ok((h_seq, caches))
}

/// Accumulates `grad += da * x^T` without temporaries.
fn accumulate_outer(grad: &mut Matrix, da: &Array1<f64>, x: &Array1<f64>) {
    let da2 = da.view().insert_axis(Axis(1));
    let x2 = x.view().insert_axis(Axis(0));
    general_mat_mul(1.0, &da2, &x2, 1.0, grad);
}

/// Exact gradients of a scalar loss through the unrolled sequence.
///
/// `upstream_grads` holds dLoss/dh_t per row. Returns the parameter
/// gradients and dLoss/dX_seq.
pub fn backprop_through_time(
    upstream_grads: &Array2<f64>,
    caches: &[StepCache],
    params: &LstmParams,
) -> Result<(LstmParams, Array2<f64>)> {
    params.validate()?;
    let n = caches.len();
    let u = params.units();
    let k = params.input_width();
    if upstream_grads.dim() != (n, u) {
        return Err(Error::shape(format!(
            "upstream gradient shape {:?} != ({n}, {u})",
            upstream_grads.dim()
        )));
    }

    let mut g = params.zeros_like();
    let mut dx_seq = Array2::zeros((n, k));
    let mut dh_next: Array1<f64> = Array1::zeros(u);
    let mut dc_next: Array1<f64> = Array1::zeros(u);

    for t in (0..n).rev() {
        let cache = &caches[t];
        let dh = &upstream_grads.row(t).to_owned() + &dh_next;

        let d_o = &dh * &cache.tanh_c;
        let dc = &dc_next + &(&dh * &cache.o * &cache.tanh_c.mapv(|v| 1.0 - v * v));

        let df = &dc * &cache.c_prev;
        let di = &dc * &cache.c_bar;
        let dc_bar = &dc * &cache.i;
        dc_next = &dc * &cache.f;

        // Pre-activation gradients through the gate nonlinearities.
        let da_f = &df * &cache.f * &cache.f.mapv(|v| 1.0 - v);
        let da_i = &di * &cache.i * &cache.i.mapv(|v| 1.0 - v);
        let da_c = &dc_bar * &cache.c_bar.mapv(|v| 1.0 - v * v);
        let da_o = &d_o * &cache.o * &cache.o.mapv(|v| 1.0 - v);

        accumulate_outer(&mut g.vf, &da_f, &cache.x);
        accumulate_outer(&mut g.vi, &da_i, &cache.x);
        accumulate_outer(&mut g.vc, &da_c, &cache.x);
        accumulate_outer(&mut g.vo, &da_o, &cache.x);
        accumulate_outer(&mut g.uf, &da_f, &cache.h_prev);
        accumulate_outer(&mut g.ui, &da_i, &cache.h_prev);
        accumulate_outer(&mut g.uc, &da_c, &cache.h_prev);
        accumulate_outer(&mut g.uo, &da_o, &cache.h_prev);
        g.bf.column_mut(0).scaled_add(1.0, &da_f);
        g.bi.column_mut(0).scaled_add(1.0, &da_i);
        g.bc.column_mut(0).scaled_add(1.0, &da_c);
        g.bo.column_mut(0).scaled_add(1.0, &da_o);

        let mut dx = params.vf.t().dot(&da_f);
        dx += &params.vi.t().dot(&da_i);
        dx += &params.vc.t().dot(&da_c);
        dx += &params.vo.t().dot(&da_o);
        dx_seq.row_mut(t).assign(&dx);

        dh_next = params.uf.t().dot(&da_f);
        dh_next += &params.ui.t().dot(&da_i);
        dh_next += &params.uc.t().dot(&da_c);
        dh_next += &params.uo.t().dot(&da_o);
    }

    Ok((g, dx_seq))
}
