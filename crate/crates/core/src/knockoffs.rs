//! Knockoff generation: train an LSTM autoencoder on the feature panel,
//! estimate per-subject idiosyncratic noise variance from the reconstruction
//! residuals, and emit knockoff panels `x_tilde = c_hat + e_tilde`.

use ndarray::{Array1, Array2};
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::nn::dense::{dense_backward, dense_forward, DenseParams};
use crate::nn::loss::mse_loss;
use crate::nn::lstm::{backprop_through_time, lstm_sequence_forward, LstmParams, StepCache};
use crate::nn::params::{Matrix, TensorSet};
use crate::nn::OptimizerState;
use crate::panel::TimeSeriesPanel;
use crate::rng::{stream_rng, Rng};

#[derive(Debug, Clone)]
pub struct AutoencoderConfig {
    /// Width of the encoder hidden state (the estimated factor dimension).
    pub bottleneck: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        AutoencoderConfig {
            bottleneck: 15,
            epochs: 1000,
            lr: 1e-3,
            seed: 0,
        }
    }
}

/// Encoder LSTM (p -> bottleneck), decoder LSTM (bottleneck -> p) and a
/// p-wide dense readout of the decoder hidden states.
#[derive(Debug, Clone)]
pub struct AutoencoderModel {
    pub encoder: LstmParams,
    pub decoder: LstmParams,
    pub output: DenseParams,
    pub config: AutoencoderConfig,
}

impl TensorSet for AutoencoderModel {
    fn tensors(&self) -> Vec<(String, &Matrix)> {
        let mut out = Vec::with_capacity(26);
        for (n, t) in self.encoder.tensors() {
            out.push((format!("enc.{n}"), t));
        }
        for (n, t) in self.decoder.tensors() {
            out.push((format!("dec.{n}"), t));
        }
        for (n, t) in self.output.tensors() {
            out.push((format!("out.{n}"), t));
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut Matrix)> {
        let mut out = Vec::with_capacity(26);
        for (n, t) in self.encoder.tensors_mut() {
            out.push((format!("enc.{n}"), t));
        }
        for (n, t) in self.decoder.tensors_mut() {
            out.push((format!("dec.{n}"), t));
        }
        for (n, t) in self.output.tensors_mut() {
            out.push((format!("out.{n}"), t));
        }
        out
    }
}

pub struct AutoencoderCaches {
    pub enc_h: Array2<f64>,
    pub enc_caches: Vec<StepCache>,
    pub dec_h: Array2<f64>,
    pub dec_caches: Vec<StepCache>,
}

impl AutoencoderModel {
    pub fn new(p: usize, config: AutoencoderConfig) -> Result<Self> {
        if config.bottleneck == 0 {
            return Err(Error::config("bottleneck must be >= 1".to_string()));
        }
        if p == 0 {
            return Err(Error::config("feature count must be >= 1".to_string()));
        }
        let mut rng = stream_rng(config.seed, 0);
        Ok(AutoencoderModel {
            encoder: LstmParams::new(config.bottleneck, p, &mut rng),
            decoder: LstmParams::new(p, config.bottleneck, &mut rng),
            output: DenseParams::new(p, p, &mut rng),
            config,
        })
    }

    pub fn zeros_like(&self) -> Self {
        AutoencoderModel {
            encoder: self.encoder.zeros_like(),
            decoder: self.decoder.zeros_like(),
            output: self.output.zeros_like(),
            config: self.config.clone(),
        }
    }

    /// In-sample reconstruction of one subject. State starts at zero, so
    /// subjects never leak state into one another.
    pub fn reconstruct(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward(x)?.0)
    }

    fn forward(&self, x: &Array2<f64>) -> Result<(Array2<f64>, AutoencoderCaches)> {
        let r = self.encoder.units();
        let p = self.decoder.units();
        let zeros_r = Array1::zeros(r);
        let zeros_p = Array1::zeros(p);
        let (enc_h, enc_caches) = lstm_sequence_forward(x, &self.encoder, &zeros_r, &zeros_r)?;
        let (dec_h, dec_caches) =
            lstm_sequence_forward(&enc_h, &self.decoder, &zeros_p, &zeros_p)?;
        let c_hat = dense_forward(&dec_h, &self.output)?;
        Ok((
            c_hat,
            AutoencoderCaches {
                enc_h,
                enc_caches,
                dec_h,
                dec_caches,
            },
        ))
    }

    /// Reconstruction MSE of one subject.
    pub fn loss(&self, x: &Array2<f64>) -> Result<f64> {
        let (c_hat, _) = self.forward(x)?;
        Ok(mse_loss(&c_hat, x)?.0)
    }

    /// Loss and exact gradients for one subject.
    pub fn loss_and_grads(&self, x: &Array2<f64>) -> Result<(f64, AutoencoderModel)> {
        let (c_hat, caches) = self.forward(x)?;
        let (loss, d_chat) = mse_loss(&c_hat, x)?;
        let (out_grads, d_dec_h) = dense_backward(&caches.dec_h, &d_chat, &self.output)?;
        let (dec_grads, d_enc_h) =
            backprop_through_time(&d_dec_h, &caches.dec_caches, &self.decoder)?;
        let (enc_grads, _) = backprop_through_time(&d_enc_h, &caches.enc_caches, &self.encoder)?;
        let mut grads = self.zeros_like();
        grads.encoder = enc_grads;
        grads.decoder = dec_grads;
        grads.output = out_grads;
        Ok((loss, grads))
    }
}

/// Trains the autoencoder on the feature panel with the design matrix as
/// both input and target. Each subject is one batch; the recurrent state is
/// reset at every subject boundary.
pub fn train_autoencoder(
    panel: &TimeSeriesPanel,
    config: &AutoencoderConfig,
) -> Result<AutoencoderModel> {
    if panel.time_points() < 2 {
        return Err(Error::data("need at least 2 time points".to_string()));
    }
    if !panel.all_finite() {
        return Err(Error::data("panel contains non-finite values".to_string()));
    }
    let mut model = AutoencoderModel::new(panel.features(), config.clone())?;
    let mut opt = OptimizerState::new(&model, config.lr);
    for _epoch in 0..config.epochs {
        for x in &panel.x {
            let (_, grads) = model.loss_and_grads(x)?;
            opt.step(&mut model, &grads)?;
        }
    }
    if !model.all_finite() {
        return Err(Error::numeric(
            "autoencoder training diverged to non-finite weights".to_string(),
        ));
    }
    Ok(model)
}

/// `theta_hat = mean(e_tk^2)` over the residual matrix `x - c_hat`.
pub fn estimate_noise_variance(x: &Array2<f64>, c_hat: &Array2<f64>) -> Result<f64> {
    if x.dim() != c_hat.dim() {
        return Err(Error::shape(format!(
            "residual shapes {:?} vs {:?}",
            x.dim(),
            c_hat.dim()
        )));
    }
    let n = x.len() as f64;
    Ok((x - c_hat).mapv(|v| v * v).sum() / n)
}

/// `x_tilde = c_hat + e_tilde` with i.i.d. N(0, theta_hat) entries.
pub fn sample_knockoffs(
    c_hat: &Array2<f64>,
    theta_hat: f64,
    rng: &mut Rng,
) -> Result<Array2<f64>> {
    if theta_hat < 0.0 || !theta_hat.is_finite() {
        return Err(Error::numeric(format!(
            "noise variance must be finite and >= 0, got {theta_hat}"
        )));
    }
    if theta_hat == 0.0 {
        return Ok(c_hat.clone());
    }
    let normal = Normal::new(0.0, theta_hat.sqrt())
        .map_err(|e| Error::numeric(format!("invalid normal params: {e}")))?;
    Ok(c_hat.mapv(|v| v + normal.sample(rng)))
}

/// Reconstruction, noise variance and knockoff panel for one subject.
#[derive(Debug, Clone)]
pub struct KnockoffResult {
    pub c_hat: Array2<f64>,
    pub theta_hat: f64,
    pub x_tilde: Array2<f64>,
    pub seed: u64,
}

/// Full knockoff construction: train on the panel, then reconstruct, estimate
/// the variance and sample the knockoff matrix separately per subject.
/// Subject `i` draws from stream `i + 1` of the config seed.
pub fn generate_knockoffs(
    panel: &TimeSeriesPanel,
    config: &AutoencoderConfig,
) -> Result<Vec<KnockoffResult>> {
    let model = train_autoencoder(panel, config)?;
    knockoffs_from_model(&model, panel)
}

/// Knockoff sampling given an already-trained autoencoder.
pub fn knockoffs_from_model(
    model: &AutoencoderModel,
    panel: &TimeSeriesPanel,
) -> Result<Vec<KnockoffResult>> {
    let mut out = Vec::with_capacity(panel.subjects());
    for (i, x) in panel.x.iter().enumerate() {
        let stream = (i + 1) as u64;
        let mut rng = stream_rng(model.config.seed, stream);
        let c_hat = model.reconstruct(x)?;
        let theta_hat = estimate_noise_variance(x, &c_hat)?;
        let x_tilde = sample_knockoffs(&c_hat, theta_hat, &mut rng)?;
        out.push(KnockoffResult {
            c_hat,
            theta_hat,
            x_tilde,
            seed: model.config.seed,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn toy_panel(m: usize, n: usize, p: usize, seed: u64) -> TimeSeriesPanel {
        let mut rng = stream_rng(seed, 0);
        let x = (0..m)
            .map(|_| crate::nn::params::glorot(n, p, &mut rng))
            .collect();
        TimeSeriesPanel::new(
            (0..m).map(|i| format!("s{i}")).collect(),
            (0..p).map(|j| format!("f{j}")).collect(),
            x,
            None,
        )
        .unwrap()
    }

    #[test]
    fn variance_estimator_worked_example() {
        let x = array![[1.0, -1.0], [2.0, 0.0]];
        let c = Array2::zeros((2, 2));
        assert_abs_diff_eq!(estimate_noise_variance(&x, &c).unwrap(), 1.5);
    }

    #[test]
    fn variance_zero_when_exact() {
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        assert_eq!(estimate_noise_variance(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn variance_concentrates_for_gaussian_residuals() {
        // 50 x 20 N(0, 4) residuals: chi-square concentration keeps the
        // estimate in [3, 5] with overwhelming probability.
        let mut rng = stream_rng(99, 0);
        let normal = Normal::new(0.0, 2.0).unwrap();
        let e = Array2::from_shape_fn((50, 20), |_| normal.sample(&mut rng));
        let c = Array2::zeros((50, 20));
        let theta = estimate_noise_variance(&e, &c).unwrap();
        assert!((3.0..=5.0).contains(&theta), "theta = {theta}");
    }

    #[test]
    fn zero_variance_returns_reconstruction() {
        let c = array![[1.0, 2.0], [3.0, 4.0]];
        let mut rng = stream_rng(1, 0);
        let xt = sample_knockoffs(&c, 0.0, &mut rng).unwrap();
        assert_eq!(xt, c);
    }

    #[test]
    fn negative_variance_rejected() {
        let c = Array2::zeros((2, 2));
        let mut rng = stream_rng(1, 0);
        assert!(sample_knockoffs(&c, -1.0, &mut rng).is_err());
    }

    #[test]
    fn knockoff_sampling_is_reproducible() {
        let c = Array2::zeros((5, 5));
        let mut a = stream_rng(7, 3);
        let mut b = stream_rng(7, 3);
        let xa = sample_knockoffs(&c, 1.0, &mut a).unwrap();
        let xb = sample_knockoffs(&c, 1.0, &mut b).unwrap();
        assert_eq!(xa, xb);
    }

    #[test]
    fn knockoff_noise_variance_matches_theta() {
        let c = Array2::zeros((100, 100));
        let mut rng = stream_rng(5, 0);
        let xt = sample_knockoffs(&c, 1.0, &mut rng).unwrap();
        let var = xt.mapv(|v| v * v).sum() / (xt.len() as f64);
        assert!((0.94..=1.06).contains(&var), "var = {var}");
    }

    #[test]
    fn zero_epochs_leaves_initialization() {
        let panel = toy_panel(1, 6, 3, 2);
        let cfg = AutoencoderConfig {
            bottleneck: 2,
            epochs: 0,
            lr: 1e-3,
            seed: 3,
        };
        let trained = train_autoencoder(&panel, &cfg).unwrap();
        let init = AutoencoderModel::new(3, cfg).unwrap();
        for ((_, a), (_, b)) in trained.tensors().into_iter().zip(init.tensors()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn training_reduces_loss_on_constant_panel() {
        let n = 8;
        let p = 3;
        let x = vec![Array2::from_elem((n, p), 0.8)];
        let panel = TimeSeriesPanel::new(
            vec!["s0".into()],
            (0..p).map(|j| format!("f{j}")).collect(),
            x,
            None,
        )
        .unwrap();
        let cfg = AutoencoderConfig {
            bottleneck: 2,
            epochs: 400,
            lr: 1e-2,
            seed: 4,
        };
        let init = AutoencoderModel::new(p, cfg.clone()).unwrap();
        let initial = init.loss(&panel.x[0]).unwrap();
        let model = train_autoencoder(&panel, &cfg).unwrap();
        let final_loss = model.loss(&panel.x[0]).unwrap();
        assert!(final_loss <= initial);
        // Constant-function fit: reconstruction approaches the constant.
        assert!(final_loss < 1e-2, "final loss {final_loss}");
    }

    #[test]
    fn identical_subjects_share_reconstruction_but_not_noise() {
        let mut rng = stream_rng(11, 0);
        let x0 = crate::nn::params::glorot(6, 3, &mut rng);
        let panel = TimeSeriesPanel::new(
            vec!["a".into(), "b".into()],
            vec!["f0".into(), "f1".into(), "f2".into()],
            vec![x0.clone(), x0],
            None,
        )
        .unwrap();
        let cfg = AutoencoderConfig {
            bottleneck: 2,
            epochs: 5,
            lr: 1e-3,
            seed: 12,
        };
        let results = generate_knockoffs(&panel, &cfg).unwrap();
        assert_eq!(results[0].c_hat, results[1].c_hat);
        assert_eq!(results[0].theta_hat, results[1].theta_hat);
        // Independent per-subject RNG streams: different noise draws.
        assert_ne!(results[0].x_tilde, results[1].x_tilde);
        // Shape preservation.
        assert_eq!(results[0].x_tilde.dim(), (6, 3));
    }

    #[test]
    fn empty_and_nonfinite_panels_rejected() {
        let mut panel = toy_panel(1, 4, 2, 1);
        panel.x[0][[0, 0]] = f64::NAN;
        let cfg = AutoencoderConfig::default();
        assert!(train_autoencoder(&panel, &cfg).is_err());
    }
}
