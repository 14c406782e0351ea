//! LSTM prediction network over augmented features and the computation of
//! knockoff statistics from its trained weights.
//!
//! Architecture per subject: pairwise-coupling filter
//! `z .* x + z_tilde .* x_tilde` -> dense (p -> k) -> optional batch norm ->
//! LSTM (k -> u) -> per-step linear readout.

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::nn::batchnorm::{
    batchnorm_backward, batchnorm_forward, update_running_stats, BatchNormCache, BatchNormParams,
};
use crate::nn::dense::{dense_backward, dense_forward, DenseParams};
use crate::nn::loss::mse_loss;
use crate::nn::lstm::{backprop_through_time, lstm_sequence_forward, LstmParams, StepCache};
use crate::nn::params::{zeros, Matrix, TensorSet};
use crate::nn::OptimizerState;
use crate::rng::stream_rng;

#[derive(Debug, Clone)]
pub struct PredictionConfig {
    pub dense_width: usize,
    pub lstm_units: usize,
    pub epochs: usize,
    pub lr: f64,
    pub batchnorm: bool,
    /// Shared initial value for both filter weight vectors.
    pub filter_init: f64,
    pub seed: u64,
}

impl Default for PredictionConfig {
    fn default() -> Self {
        PredictionConfig {
            dense_width: 32,
            lstm_units: 32,
            epochs: 1000,
            lr: 1e-3,
            batchnorm: false,
            filter_init: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PredictionModel {
    pub z: Matrix,       // (p x 1) filter weights for original features
    pub z_tilde: Matrix, // (p x 1) filter weights for knockoffs
    pub dense: DenseParams,
    pub bn: Option<BatchNormParams>,
    pub lstm: LstmParams,
    pub v1: Matrix,          // (u x 1) output weights
    pub output_bias: Matrix, // (1 x 1)
    pub config: PredictionConfig,
}

impl TensorSet for PredictionModel {
    fn tensors(&self) -> Vec<(String, &Matrix)> {
        let mut out = Vec::with_capacity(20);
        out.push(("z".to_string(), &self.z));
        out.push(("z_tilde".to_string(), &self.z_tilde));
        for (n, t) in self.dense.tensors() {
            out.push((format!("dense.{n}"), t));
        }
        if let Some(bn) = &self.bn {
            for (n, t) in bn.tensors() {
                out.push((format!("bn.{n}"), t));
            }
        }
        for (n, t) in self.lstm.tensors() {
            out.push((format!("lstm.{n}"), t));
        }
        out.push(("v1".to_string(), &self.v1));
        out.push(("output_bias".to_string(), &self.output_bias));
        out
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut Matrix)> {
        let mut out = Vec::with_capacity(20);
        out.push(("z".to_string(), &mut self.z));
        out.push(("z_tilde".to_string(), &mut self.z_tilde));
        for (n, t) in self.dense.tensors_mut() {
            out.push((format!("dense.{n}"), t));
        }
        if let Some(bn) = &mut self.bn {
            for (n, t) in bn.tensors_mut() {
                out.push((format!("bn.{n}"), t));
            }
        }
        for (n, t) in self.lstm.tensors_mut() {
            out.push((format!("lstm.{n}"), t));
        }
        out.push(("v1".to_string(), &mut self.v1));
        out.push(("output_bias".to_string(), &mut self.output_bias));
        out
    }
}

pub struct PredictionCaches {
    pub filtered: Array2<f64>,
    pub dense_out: Array2<f64>,
    pub bn_cache: Option<BatchNormCache>,
    pub lstm_in: Array2<f64>,
    pub lstm_h: Array2<f64>,
    pub lstm_caches: Vec<StepCache>,
}

/// Builds the network with `z` and `z_tilde` initialized to the same value,
/// which makes all knockoff statistics exactly zero before training.
pub fn build_prediction_network(
    p: usize,
    config: &PredictionConfig,
) -> Result<PredictionModel> {
    if p == 0 {
        return Err(Error::config("feature count must be >= 1".to_string()));
    }
    if config.dense_width == 0 || config.lstm_units == 0 {
        return Err(Error::config("layer widths must be >= 1".to_string()));
    }
    let mut rng = stream_rng(config.seed, 0);
    let mut z = zeros(p, 1);
    z.fill(config.filter_init);
    let z_tilde = z.clone();
    Ok(PredictionModel {
        z,
        z_tilde,
        dense: DenseParams::new(p, config.dense_width, &mut rng),
        bn: config.batchnorm.then(|| BatchNormParams::new(config.dense_width)),
        lstm: LstmParams::new(config.lstm_units, config.dense_width, &mut rng),
        v1: crate::nn::params::glorot(config.lstm_units, 1, &mut rng),
        output_bias: zeros(1, 1),
        config: config.clone(),
    })
}

impl PredictionModel {
    pub fn zeros_like(&self) -> Self {
        PredictionModel {
            z: zeros(self.z.nrows(), 1),
            z_tilde: zeros(self.z.nrows(), 1),
            dense: self.dense.zeros_like(),
            bn: self.bn.as_ref().map(|b| b.zeros_like()),
            lstm: self.lstm.zeros_like(),
            v1: zeros(self.v1.nrows(), 1),
            output_bias: zeros(1, 1),
            config: self.config.clone(),
        }
    }

    pub fn features(&self) -> usize {
        self.z.nrows()
    }

    /// Pairwise-coupling filter: feature j and its knockoff share slot j.
    pub fn filter_output(&self, x: &Array2<f64>, x_tilde: &Array2<f64>) -> Result<Array2<f64>> {
        if x.dim() != x_tilde.dim() || x.ncols() != self.features() {
            return Err(Error::shape(format!(
                "filter shapes {:?} vs {:?} (p = {})",
                x.dim(),
                x_tilde.dim(),
                self.features()
            )));
        }
        Ok(x * &self.z.column(0) + x_tilde * &self.z_tilde.column(0))
    }

    /// Forward pass over one subject. Batch-norm (when enabled) uses the
    /// batch statistics of this subject.
    pub fn forward(
        &self,
        x: &Array2<f64>,
        x_tilde: &Array2<f64>,
    ) -> Result<(Array1<f64>, PredictionCaches)> {
        let filtered = self.filter_output(x, x_tilde)?;
        let dense_out = dense_forward(&filtered, &self.dense)?;
        let (lstm_in, bn_cache) = match &self.bn {
            Some(bn) => {
                let (out, cache) = batchnorm_forward(&dense_out, bn)?;
                (out, Some(cache))
            }
            None => (dense_out.clone(), None),
        };
        let u = self.lstm.units();
        let zeros_u = Array1::zeros(u);
        let (lstm_h, lstm_caches) =
            lstm_sequence_forward(&lstm_in, &self.lstm, &zeros_u, &zeros_u)?;
        let y_hat = lstm_h.dot(&self.v1.column(0)) + self.output_bias[[0, 0]];
        Ok((
            y_hat,
            PredictionCaches {
                filtered,
                dense_out,
                bn_cache,
                lstm_in,
                lstm_h,
                lstm_caches,
            },
        ))
    }

    pub fn loss(&self, x: &Array2<f64>, x_tilde: &Array2<f64>, y: &Array1<f64>) -> Result<f64> {
        let (y_hat, _) = self.forward(x, x_tilde)?;
        let pred = y_hat.insert_axis(Axis(1));
        let target = y.view().insert_axis(Axis(1)).to_owned();
        Ok(mse_loss(&pred, &target)?.0)
    }

    /// Loss and exact gradients for one subject.
    pub fn loss_and_grads(
        &self,
        x: &Array2<f64>,
        x_tilde: &Array2<f64>,
        y: &Array1<f64>,
    ) -> Result<(f64, PredictionModel, PredictionCaches)> {
        let (y_hat, caches) = self.forward(x, x_tilde)?;
        if y.len() != y_hat.len() {
            return Err(Error::shape("response length mismatch".to_string()));
        }
        let pred = y_hat.insert_axis(Axis(1));
        let target = y.view().insert_axis(Axis(1)).to_owned();
        let (loss, d_pred) = mse_loss(&pred, &target)?;
        let dy = d_pred.column(0).to_owned();

        let mut grads = self.zeros_like();
        grads
            .v1
            .column_mut(0)
            .assign(&caches.lstm_h.t().dot(&dy));
        grads.output_bias[[0, 0]] = dy.sum();

        let d_h = dy.view().insert_axis(Axis(1)).to_owned().dot(&self.v1.t());
        let (lstm_grads, d_lstm_in) =
            backprop_through_time(&d_h, &caches.lstm_caches, &self.lstm)?;
        grads.lstm = lstm_grads;

        let d_dense_out = match (&self.bn, &caches.bn_cache) {
            (Some(bn), Some(cache)) => {
                let (bn_grads, dx) = batchnorm_backward(&d_lstm_in, cache, bn)?;
                grads.bn = Some(bn_grads);
                dx
            }
            _ => d_lstm_in,
        };

        let (dense_grads, d_filtered) =
            dense_backward(&caches.filtered, &d_dense_out, &self.dense)?;
        grads.dense = dense_grads;

        grads
            .z
            .column_mut(0)
            .assign(&(&d_filtered * x).sum_axis(Axis(0)));
        grads
            .z_tilde
            .column_mut(0)
            .assign(&(&d_filtered * x_tilde).sum_axis(Axis(0)));

        Ok((loss, grads, caches))
    }
}

/// Trains the prediction network on the augmented panel. One subject per
/// batch, state reset at subject boundaries, deterministic given the seed.
pub fn train_prediction_network(
    x_panel: &[Array2<f64>],
    x_tilde_panel: &[Array2<f64>],
    y_panel: &[Array1<f64>],
    config: &PredictionConfig,
) -> Result<PredictionModel> {
    if x_panel.is_empty() {
        return Err(Error::data("empty panel".to_string()));
    }
    if x_panel.len() != x_tilde_panel.len() || x_panel.len() != y_panel.len() {
        return Err(Error::shape("panel subject counts differ".to_string()));
    }
    let p = x_panel[0].ncols();
    for ((x, xt), y) in x_panel.iter().zip(x_tilde_panel).zip(y_panel) {
        if x.dim() != xt.dim() || x.ncols() != p || y.len() != x.nrows() {
            return Err(Error::shape("panel shapes disagree".to_string()));
        }
        if x.iter().any(|v| !v.is_finite())
            || xt.iter().any(|v| !v.is_finite())
            || y.iter().any(|v| !v.is_finite())
        {
            return Err(Error::data("non-finite training inputs".to_string()));
        }
    }

    let mut model = build_prediction_network(p, config)?;
    let mut opt = OptimizerState::new(&model, config.lr);
    for _epoch in 0..config.epochs {
        for ((x, xt), y) in x_panel.iter().zip(x_tilde_panel).zip(y_panel) {
            let (_, grads, caches) = model.loss_and_grads(x, xt, y)?;
            opt.step(&mut model, &grads)?;
            if let (Some(bn), Some(cache)) = (&mut model.bn, &caches.bn_cache) {
                update_running_stats(bn, cache);
            }
        }
    }
    if !model.all_finite() {
        return Err(Error::numeric(
            "prediction training diverged to non-finite weights".to_string(),
        ));
    }
    Ok(model)
}

/// Per-gate weight-path contributions `(w_dense .* gamma) vg^T v1`, one
/// p-vector per gate. The batch-norm factor is dropped when disabled.
pub fn gate_path_contributions(
    model: &PredictionModel,
) -> (Array1<f64>, Array1<f64>, Array1<f64>, Array1<f64>) {
    let w_eff = match &model.bn {
        Some(bn) => &model.dense.w * &bn.gamma.column(0),
        None => model.dense.w.clone(),
    };
    let v1 = model.v1.column(0);
    let path = |vg: &Matrix| -> Array1<f64> { w_eff.dot(&vg.t().dot(&v1)) };
    (
        path(&model.lstm.vf),
        path(&model.lstm.vi),
        path(&model.lstm.vc),
        path(&model.lstm.vo),
    )
}

/// Importance scores: `Z_j = |z_j| * ||(v_fj, v_ij, v_cj, v_oj)||_2` and the
/// same with `z_tilde` for the knockoffs.
pub fn importance_scores(model: &PredictionModel) -> (Array1<f64>, Array1<f64>) {
    let (vf, vi, vc, vo) = gate_path_contributions(model);
    let p = model.features();
    let mut z_score = Array1::zeros(p);
    let mut zt_score = Array1::zeros(p);
    for j in 0..p {
        let norm = (vf[j].powi(2) + vi[j].powi(2) + vc[j].powi(2) + vo[j].powi(2)).sqrt();
        z_score[j] = model.z[[j, 0]].abs() * norm;
        zt_score[j] = model.z_tilde[[j, 0]].abs() * norm;
    }
    (z_score, zt_score)
}

/// `W_j = Z_j^2 - Z_tilde_j^2`.
pub fn knockoff_statistics(z: &Array1<f64>, z_tilde: &Array1<f64>) -> Result<Array1<f64>> {
    if z.len() != z_tilde.len() {
        return Err(Error::shape("importance vector lengths differ".to_string()));
    }
    Ok(z.mapv(|v| v * v) - z_tilde.mapv(|v| v * v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::master_rng;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn cfg(epochs: usize) -> PredictionConfig {
        PredictionConfig {
            dense_width: 4,
            lstm_units: 3,
            epochs,
            lr: 1e-2,
            batchnorm: false,
            filter_init: 0.1,
            seed: 9,
        }
    }

    #[test]
    fn fresh_network_has_zero_statistics() {
        let model = build_prediction_network(5, &cfg(0)).unwrap();
        let (z, zt) = importance_scores(&model);
        let w = knockoff_statistics(&z, &zt).unwrap();
        assert!(w.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn filter_with_equal_inputs_sums_weights() {
        let mut model = build_prediction_network(2, &cfg(0)).unwrap();
        model.z[[0, 0]] = 0.3;
        model.z_tilde[[0, 0]] = 0.5;
        let x = array![[2.0, 1.0]];
        let out = model.filter_output(&x, &x).unwrap();
        assert_abs_diff_eq!(out[[0, 0]], (0.3 + 0.5) * 2.0, epsilon = 1e-15);
    }

    #[test]
    fn single_feature_network_trains() {
        let mut rng = master_rng(31);
        let x = vec![crate::nn::params::glorot(10, 1, &mut rng)];
        let xt = vec![crate::nn::params::glorot(10, 1, &mut rng)];
        let y = vec![x[0].column(0).to_owned()];
        let model = train_prediction_network(&x, &xt, &y, &cfg(3)).unwrap();
        assert!(model.all_finite());
    }

    #[test]
    fn zero_output_layer_and_zero_response_stay_at_zero_loss() {
        let mut model = build_prediction_network(3, &cfg(0)).unwrap();
        model.v1.fill(0.0);
        model.output_bias.fill(0.0);
        let mut rng = master_rng(33);
        let x = crate::nn::params::glorot(6, 3, &mut rng);
        let xt = crate::nn::params::glorot(6, 3, &mut rng);
        let y = Array1::zeros(6);
        assert_eq!(model.loss(&x, &xt, &y).unwrap(), 0.0);
    }

    #[test]
    fn training_reduces_loss_on_linear_data() {
        let mut rng = master_rng(35);
        let n = 30;
        let p = 4;
        let x = crate::nn::params::glorot(n, p, &mut rng);
        let xt = crate::nn::params::glorot(n, p, &mut rng);
        let beta = array![3.0, -2.0, 0.0, 0.0];
        let y = x.dot(&beta);
        let init = build_prediction_network(p, &cfg(0)).unwrap();
        let initial = init.loss(&x, &xt, &y).unwrap();
        let trained = train_prediction_network(
            std::slice::from_ref(&x),
            std::slice::from_ref(&xt),
            std::slice::from_ref(&y),
            &cfg(300),
        )
        .unwrap();
        let final_loss = trained.loss(&x, &xt, &y).unwrap();
        assert!(
            final_loss < 0.5 * initial,
            "loss {initial} -> {final_loss}"
        );
    }

    #[test]
    fn gate_paths_zero_when_output_weights_zero() {
        let mut model = build_prediction_network(4, &cfg(0)).unwrap();
        model.v1.fill(0.0);
        let (vf, vi, vc, vo) = gate_path_contributions(&model);
        for v in [vf, vi, vc, vo] {
            assert!(v.iter().all(|x| *x == 0.0));
        }
    }

    #[test]
    fn gate_paths_scalar_network_by_hand() {
        let mut model = PredictionModel {
            z: zeros(1, 1),
            z_tilde: zeros(1, 1),
            dense: DenseParams::zeros(1, 1),
            bn: Some(BatchNormParams::new(1)),
            lstm: LstmParams::zeros(1, 1),
            v1: zeros(1, 1),
            output_bias: zeros(1, 1),
            config: cfg(0),
        };
        model.dense.w[[0, 0]] = 2.0;
        model.bn.as_mut().unwrap().gamma[[0, 0]] = 3.0;
        model.lstm.vf[[0, 0]] = 5.0;
        model.v1[[0, 0]] = 7.0;
        let (vf, _, _, _) = gate_path_contributions(&model);
        assert_abs_diff_eq!(vf[0], 2.0 * 3.0 * 5.0 * 7.0, epsilon = 1e-12);
    }

    #[test]
    fn gate_paths_match_naive_triple_sum() {
        let p = 4;
        let k = 3;
        let u = 2;
        let mut rng = master_rng(37);
        let model = PredictionModel {
            z: crate::nn::params::glorot(p, 1, &mut rng),
            z_tilde: crate::nn::params::glorot(p, 1, &mut rng),
            dense: DenseParams::new(p, k, &mut rng),
            bn: {
                let mut bn = BatchNormParams::new(k);
                bn.gamma = crate::nn::params::glorot(k, 1, &mut rng);
                Some(bn)
            },
            lstm: LstmParams::new(u, k, &mut rng),
            v1: crate::nn::params::glorot(u, 1, &mut rng),
            output_bias: zeros(1, 1),
            config: cfg(0),
        };
        let (vf, _, _, _) = gate_path_contributions(&model);
        let bn = model.bn.as_ref().unwrap();
        for j in 0..p {
            let mut expected = 0.0;
            for a in 0..k {
                for b in 0..u {
                    expected += model.dense.w[[j, a]]
                        * bn.gamma[[a, 0]]
                        * model.lstm.vf[[b, a]]
                        * model.v1[[b, 0]];
                }
            }
            assert_abs_diff_eq!(vf[j], expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn importance_zero_filter_weight() {
        let mut model = build_prediction_network(3, &cfg(0)).unwrap();
        model.z[[1, 0]] = 0.0;
        let (z, _) = importance_scores(&model);
        assert_eq!(z[1], 0.0);
    }

    #[test]
    fn importance_unit_case() {
        let mut model = PredictionModel {
            z: zeros(1, 1),
            z_tilde: zeros(1, 1),
            dense: DenseParams::zeros(1, 1),
            bn: None,
            lstm: LstmParams::zeros(1, 1),
            v1: zeros(1, 1),
            output_bias: zeros(1, 1),
            config: cfg(0),
        };
        // z_j = 1 and all four gate contributions equal to 1 at j.
        model.z[[0, 0]] = 1.0;
        model.dense.w[[0, 0]] = 1.0;
        model.lstm.vf[[0, 0]] = 1.0;
        model.lstm.vi[[0, 0]] = 1.0;
        model.lstm.vc[[0, 0]] = 1.0;
        model.lstm.vo[[0, 0]] = 1.0;
        model.v1[[0, 0]] = 1.0;
        let (z, _) = importance_scores(&model);
        assert_abs_diff_eq!(z[0], 2.0, epsilon = 1e-14);
    }

    #[test]
    fn statistics_worked_examples() {
        let z = array![2.0, 0.0];
        let zt = array![1.0, 2.0];
        let w = knockoff_statistics(&z, &zt).unwrap();
        assert_eq!(w[0], 3.0);
        assert_eq!(w[1], -4.0);

        let equal = array![1.5, 0.3];
        let w0 = knockoff_statistics(&equal, &equal).unwrap();
        assert!(w0.iter().all(|v| *v == 0.0));

        assert!(knockoff_statistics(&z, &array![1.0]).is_err());
    }

    #[test]
    fn importance_scores_nonnegative() {
        let mut rng = master_rng(39);
        let x = vec![crate::nn::params::glorot(12, 3, &mut rng)];
        let xt = vec![crate::nn::params::glorot(12, 3, &mut rng)];
        let y = vec![x[0].column(0).to_owned()];
        let model = train_prediction_network(&x, &xt, &y, &cfg(20)).unwrap();
        let (z, zt) = importance_scores(&model);
        assert!(z.iter().all(|v| *v >= 0.0));
        assert!(zt.iter().all(|v| *v >= 0.0));
    }
}
