//! Synthetic longitudinal panels from latent factor models: AR(1) raw
//! factors with temporal weighting, linear or logistic factor maps, sparse
//! coefficient vectors, linear or nonlinear links, and an optional latent
//! confounder in the response.

use ndarray::{Array1, Array2};
use rand::seq::index::sample;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::panel::TimeSeriesPanel;
use crate::rng::{stream_rng, Rng};

/// AR(1) correlation across factor coordinates.
const FACTOR_AR_COEFF: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorModel {
    Linear,
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    Linear,
    Nonlinear,
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub subjects: usize,
    pub time_points: usize,
    pub features: usize,
    pub factors: usize,
    pub signals: usize,
    pub amplitude: f64,
    pub w0: f64,
    pub w1: f64,
    pub factor_model: FactorModel,
    pub link: Link,
    pub confounders: bool,
    pub noise_sd: f64,
    /// Redraw loadings per subject instead of sharing one loading matrix.
    pub redraw_loadings: bool,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            subjects: 1,
            time_points: 1000,
            features: 500,
            factors: 3,
            signals: 10,
            amplitude: 10.0,
            w0: 0.3,
            w1: 0.7,
            factor_model: FactorModel::Linear,
            link: Link::Linear,
            confounders: false,
            noise_sd: 1.0,
            redraw_loadings: false,
            seed: 0,
        }
    }
}

impl SimConfig {
    /// Single-subject benchmark setting: n = 1000 time points, p = 500.
    pub fn benchmark() -> Self {
        SimConfig::default()
    }

    /// Reduced-size setting for fast end-to-end checks:
    /// n = 400 time points, p = 100 features.
    pub fn scaled() -> Self {
        SimConfig {
            time_points: 400,
            features: 100,
            ..SimConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.subjects == 0 || self.time_points == 0 || self.features == 0 {
            return Err(Error::config("panel dimensions must be >= 1".to_string()));
        }
        if self.factors == 0 {
            return Err(Error::config("factor count must be >= 1".to_string()));
        }
        if self.signals > self.features {
            return Err(Error::config(format!(
                "signal count {} exceeds feature count {}",
                self.signals, self.features
            )));
        }
        if self.amplitude <= 0.0 && self.signals > 0 {
            return Err(Error::config("signal amplitude must be positive".to_string()));
        }
        if (self.w0 + self.w1 - 1.0).abs() > 1e-12 {
            return Err(Error::config(format!(
                "temporal weights must sum to 1, got {} + {}",
                self.w0, self.w1
            )));
        }
        if self.noise_sd < 0.0 {
            return Err(Error::config("noise sd must be nonnegative".to_string()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub enum Loadings {
    /// (p x r) loading matrix for the linear factor map.
    Linear(Array2<f64>),
    /// Per-feature scale `c` (p) and coefficients with intercept (p x (r+1)).
    Logistic { c: Array1<f64>, lambda: Array2<f64> },
}

#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub beta: Array1<f64>,
    /// Indices of the true signals, ascending.
    pub signal_set: Vec<usize>,
    /// Weighted factor paths, one (n x r) matrix per subject.
    pub factors: Vec<Array2<f64>>,
    pub loadings: Vec<Loadings>,
}

fn standard_normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// One draw from N(0, Σ) with Σ_ij = 0.9^{|i-j|}, via the stationary AR(1)
/// recursion across coordinates.
fn ar1_row(r: usize, rng: &mut Rng) -> Array1<f64> {
    let innovation_sd = (1.0 - FACTOR_AR_COEFF * FACTOR_AR_COEFF).sqrt();
    let mut row = Array1::zeros(r);
    row[0] = standard_normal(rng);
    for j in 1..r {
        row[j] = FACTOR_AR_COEFF * row[j - 1] + innovation_sd * standard_normal(rng);
    }
    row
}

/// Weighted factor paths: raw rows are i.i.d. N(0, Σ); the emitted factors
/// mix consecutive raw rows, `f_t = w0 raw_{t-1} + w1 raw_t` (first row
/// passes through).
pub fn gen_factors(n: usize, r: usize, w0: f64, w1: f64, rng: &mut Rng) -> Result<Array2<f64>> {
    if (w0 + w1 - 1.0).abs() > 1e-12 {
        return Err(Error::config(format!(
            "temporal weights must sum to 1, got {w0} + {w1}"
        )));
    }
    let mut f = Array2::zeros((n, r));
    let mut prev = ar1_row(r, rng);
    f.row_mut(0).assign(&prev);
    for t in 1..n {
        let raw = ar1_row(r, rng);
        let mixed = w0 * &prev + w1 * &raw;
        f.row_mut(t).assign(&mixed);
        prev = raw;
    }
    Ok(f)
}

/// Linear factor map `X = F L^T + E` with standard normal noise.
pub fn gen_design_linear(f: &Array2<f64>, loadings: &Array2<f64>, rng: &mut Rng) -> Result<Array2<f64>> {
    if f.ncols() != loadings.ncols() {
        return Err(Error::shape(format!(
            "factor width {} vs loading width {}",
            f.ncols(),
            loadings.ncols()
        )));
    }
    let mut x = f.dot(&loadings.t());
    for v in x.iter_mut() {
        *v += standard_normal(rng);
    }
    Ok(x)
}

/// Logistic factor map `x_tk = c_k / (1 + exp([1, f_t] . lambda_k)) + eps`.
pub fn gen_design_logistic(
    f: &Array2<f64>,
    c: &Array1<f64>,
    lambda: &Array2<f64>,
    rng: &mut Rng,
) -> Result<Array2<f64>> {
    let r = f.ncols();
    if lambda.ncols() != r + 1 || lambda.nrows() != c.len() {
        return Err(Error::shape(format!(
            "logistic loadings ({} x {}) incompatible with r = {} and p = {}",
            lambda.nrows(),
            lambda.ncols(),
            r,
            c.len()
        )));
    }
    let (n, p) = (f.nrows(), c.len());
    let mut x = Array2::zeros((n, p));
    for t in 0..n {
        let ft = f.row(t);
        for k in 0..p {
            let lam = lambda.row(k);
            let mut logit = lam[0];
            for j in 0..r {
                logit += ft[j] * lam[j + 1];
            }
            x[[t, k]] = c[k] / (1.0 + logit.exp()) + standard_normal(rng);
        }
    }
    Ok(x)
}

/// Sparse coefficient vector: `s` positions chosen uniformly without
/// replacement, each set to +A or -A with equal probability.
pub fn gen_coefficients(
    p: usize,
    s: usize,
    amplitude: f64,
    rng: &mut Rng,
) -> Result<(Array1<f64>, Vec<usize>)> {
    if s > p {
        return Err(Error::config(format!("s = {s} exceeds p = {p}")));
    }
    let mut beta = Array1::zeros(p);
    let mut signal_set: Vec<usize> = sample(rng, p, s).into_vec();
    signal_set.sort_unstable();
    for j in &signal_set {
        beta[*j] = if rng.random::<bool>() { amplitude } else { -amplitude };
    }
    Ok((beta, signal_set))
}

/// Response with a linear or `sin(u) exp(u)` link, optional confounding by
/// the mean of the first three factor coordinates, and N(0, noise_sd²) error.
pub fn gen_response(
    x: &Array2<f64>,
    beta: &Array1<f64>,
    link: Link,
    f: &Array2<f64>,
    confounders: bool,
    noise_sd: f64,
    rng: &mut Rng,
) -> Result<Array1<f64>> {
    if x.ncols() != beta.len() {
        return Err(Error::shape("beta length mismatch".to_string()));
    }
    if confounders && f.ncols() < 3 {
        return Err(Error::config(
            "confounded response needs at least 3 factor coordinates".to_string(),
        ));
    }
    if x.nrows() != f.nrows() {
        return Err(Error::shape("design and factor row counts differ".to_string()));
    }
    let xb = x.dot(beta);
    let mut y = match link {
        Link::Linear => xb,
        Link::Nonlinear => xb.mapv(|u| u.sin() * u.exp()),
    };
    if confounders {
        for t in 0..y.len() {
            y[t] += (f[[t, 0]] + f[[t, 1]] + f[[t, 2]]) / 3.0;
        }
    }
    if noise_sd > 0.0 {
        for v in y.iter_mut() {
            *v += noise_sd * standard_normal(rng);
        }
    }
    Ok(y)
}

fn gen_loadings(config: &SimConfig, rng: &mut Rng) -> Loadings {
    let normal = |rows: usize, cols: usize, rng: &mut Rng| {
        Array2::from_shape_fn((rows, cols), |_| standard_normal(rng))
    };
    match config.factor_model {
        FactorModel::Linear => Loadings::Linear(normal(config.features, config.factors, rng)),
        FactorModel::Logistic => Loadings::Logistic {
            c: Array1::from_shape_fn(config.features, |_| standard_normal(rng)),
            lambda: normal(config.features, config.factors + 1, rng),
        },
    }
}

/// Generates a full multi-subject panel with ground truth. Pure function of
/// the config (including its seed): stream 0 draws the coefficients and the
/// shared loadings, stream i+1 drives subject i.
pub fn simulate(config: &SimConfig) -> Result<(TimeSeriesPanel, GroundTruth)> {
    config.validate()?;
    let mut shared_rng = stream_rng(config.seed, 0);
    let (beta, signal_set) =
        gen_coefficients(config.features, config.signals, config.amplitude, &mut shared_rng)?;
    let shared_loadings = gen_loadings(config, &mut shared_rng);

    let mut x_panel = Vec::with_capacity(config.subjects);
    let mut y_panel = Vec::with_capacity(config.subjects);
    let mut factors = Vec::with_capacity(config.subjects);
    let mut loadings = Vec::with_capacity(config.subjects);
    for i in 0..config.subjects {
        let mut rng = stream_rng(config.seed, i as u64 + 1);
        let f = gen_factors(config.time_points, config.factors, config.w0, config.w1, &mut rng)?;
        let subject_loadings = if config.redraw_loadings {
            gen_loadings(config, &mut rng)
        } else {
            shared_loadings.clone()
        };
        let x = match &subject_loadings {
            Loadings::Linear(l) => gen_design_linear(&f, l, &mut rng)?,
            Loadings::Logistic { c, lambda } => gen_design_logistic(&f, c, lambda, &mut rng)?,
        };
        let y = gen_response(
            &x,
            &beta,
            config.link,
            &f,
            config.confounders,
            config.noise_sd,
            &mut rng,
        )?;
        x_panel.push(x);
        y_panel.push(y);
        factors.push(f);
        loadings.push(subject_loadings);
    }

    let subject_ids = (0..config.subjects).map(|i| format!("subject_{i}")).collect();
    let feature_names = (0..config.features).map(|j| format!("feature_{j}")).collect();
    let panel = TimeSeriesPanel::new(subject_ids, feature_names, x_panel, Some(y_panel))?;
    Ok((
        panel,
        GroundTruth {
            beta,
            signal_set,
            factors,
            loadings,
        },
    ))
}
