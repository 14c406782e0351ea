//! Run configuration: defaults, optional key=value config file, and
//! command-line overrides, resolved in that order.

use std::collections::BTreeMap;
use std::path::Path;

use tsknock_core::knockoffs::AutoencoderConfig;
use tsknock_core::pipeline::PipelineConfig;
use tsknock_core::prediction::PredictionConfig;
use tsknock_core::sim::{FactorModel, Link, SimConfig};
use tsknock_core::{Error, Result};

/// Fully resolved configuration for any subcommand.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub q: f64,
    pub epochs_autoencoder: usize,
    pub epochs_prediction: usize,
    pub bottleneck: usize,
    pub dense_width: usize,
    pub lstm_units: usize,
    pub lr: f64,
    pub batchnorm: bool,
    pub repetitions: usize,
    pub parallelism: usize,
    pub sim: SimConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            q: 0.2,
            epochs_autoencoder: 1000,
            epochs_prediction: 1000,
            bottleneck: 15,
            dense_width: 32,
            lstm_units: 32,
            lr: 1e-3,
            batchnorm: false,
            repetitions: 1,
            parallelism: default_parallelism(),
            sim: SimConfig::default(),
        }
    }
}

/// Default worker count, overridable with the TSKNOCK_PARALLELISM variable.
pub fn default_parallelism() -> usize {
    std::env::var("TSKNOCK_PARALLELISM")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|v| *v >= 1)
        .unwrap_or(1)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::config(format!("q = {} outside (0, 1)", self.q)));
        }
        if self.repetitions == 0 {
            return Err(Error::config("repetitions must be >= 1".to_string()));
        }
        if self.parallelism == 0 {
            return Err(Error::config("parallelism must be >= 1".to_string()));
        }
        self.sim.validate()
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            q: self.q,
            autoencoder: AutoencoderConfig {
                bottleneck: self.bottleneck,
                epochs: self.epochs_autoencoder,
                lr: self.lr,
                seed: self.seed,
            },
            prediction: PredictionConfig {
                dense_width: self.dense_width,
                lstm_units: self.lstm_units,
                epochs: self.epochs_prediction,
                lr: self.lr,
                batchnorm: self.batchnorm,
                filter_init: 0.1,
                seed: self.seed,
            },
        }
    }

    /// Applies one key=value assignment (config-file line or derived from a
    /// flag).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::config(format!("bad value '{value}' for '{key}'")))
        }
        match key {
            "seed" => self.seed = parse(key, value)?,
            "q" => self.q = parse(key, value)?,
            "epochs_autoencoder" => self.epochs_autoencoder = parse(key, value)?,
            "epochs_prediction" => self.epochs_prediction = parse(key, value)?,
            "bottleneck" => self.bottleneck = parse(key, value)?,
            "dense_width" => self.dense_width = parse(key, value)?,
            "lstm_units" => self.lstm_units = parse(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "batchnorm" => self.batchnorm = parse(key, value)?,
            "repetitions" => self.repetitions = parse(key, value)?,
            "parallelism" => self.parallelism = parse(key, value)?,
            "subjects" => self.sim.subjects = parse(key, value)?,
            "time_points" => self.sim.time_points = parse(key, value)?,
            "features" => self.sim.features = parse(key, value)?,
            "factors" => self.sim.factors = parse(key, value)?,
            "signals" => self.sim.signals = parse(key, value)?,
            "amplitude" => self.sim.amplitude = parse(key, value)?,
            "w0" => self.sim.w0 = parse(key, value)?,
            "w1" => self.sim.w1 = parse(key, value)?,
            "noise_sd" => self.sim.noise_sd = parse(key, value)?,
            "confounders" => self.sim.confounders = parse(key, value)?,
            "redraw_loadings" => self.sim.redraw_loadings = parse(key, value)?,
            "factor_model" => {
                self.sim.factor_model = match value {
                    "linear" => FactorModel::Linear,
                    "logistic" => FactorModel::Logistic,
                    _ => {
                        return Err(Error::config(format!(
                            "factor_model must be linear or logistic, got '{value}'"
                        )))
                    }
                }
            }
            "link" => {
                self.sim.link = match value {
                    "linear" => Link::Linear,
                    "nonlinear" => Link::Nonlinear,
                    _ => {
                        return Err(Error::config(format!(
                            "link must be linear or nonlinear, got '{value}'"
                        )))
                    }
                }
            }
            _ => return Err(Error::config(format!("unknown config key '{key}'"))),
        }
        // Sim runs use the same master seed as the networks.
        self.sim.seed = self.seed;
        Ok(())
    }

    /// Reads a key=value config file ('#' starts a comment).
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!(
                    "{}:{}: expected key=value, got '{line}'",
                    path.display(),
                    lineno + 1
                ))
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// All resolved settings as sorted key=value pairs for the manifest.
    pub fn entries(&self) -> BTreeMap<String, String> {
        let mut map = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            map.insert(k.to_string(), v);
        };
        put("seed", self.seed.to_string());
        put("q", self.q.to_string());
        put("epochs_autoencoder", self.epochs_autoencoder.to_string());
        put("epochs_prediction", self.epochs_prediction.to_string());
        put("bottleneck", self.bottleneck.to_string());
        put("dense_width", self.dense_width.to_string());
        put("lstm_units", self.lstm_units.to_string());
        put("lr", self.lr.to_string());
        put("batchnorm", self.batchnorm.to_string());
        put("repetitions", self.repetitions.to_string());
        put("parallelism", self.parallelism.to_string());
        put("subjects", self.sim.subjects.to_string());
        put("time_points", self.sim.time_points.to_string());
        put("features", self.sim.features.to_string());
        put("factors", self.sim.factors.to_string());
        put("signals", self.sim.signals.to_string());
        put("amplitude", self.sim.amplitude.to_string());
        put("w0", self.sim.w0.to_string());
        put("w1", self.sim.w1.to_string());
        put("noise_sd", self.sim.noise_sd.to_string());
        put("confounders", self.sim.confounders.to_string());
        put("redraw_loadings", self.sim.redraw_loadings.to_string());
        put(
            "factor_model",
            match self.sim.factor_model {
                FactorModel::Linear => "linear".to_string(),
                FactorModel::Logistic => "logistic".to_string(),
            },
        );
        put(
            "link",
            match self.sim.link {
                Link::Linear => "linear".to_string(),
                Link::Nonlinear => "nonlinear".to_string(),
            },
        );
        map
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    #[test]
    fn flags_override_file_overrides_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "# comment\nq = 0.1\nfeatures = 50").unwrap();
        let mut config = RunConfig::default();
        config.apply_file(&path).unwrap();
        assert_eq!(config.q, 0.1);
        assert_eq!(config.sim.features, 50);
        config.set("q", "0.3").unwrap();
        assert_eq!(config.q, 0.3);
        assert_eq!(config.epochs_autoencoder, 1000);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let mut config = RunConfig::default();
        assert!(config.set("nope", "1").is_err());
        assert!(config.set("q", "abc").is_err());
        assert!(config.set("factor_model", "cubic").is_err());
    }

    #[test]
    fn seed_propagates_to_sim() {
        let mut config = RunConfig::default();
        config.set("seed", "99").unwrap();
        assert_eq!(config.sim.seed, 99);
    }

    #[test]
    fn entries_round_trip_through_set() {
        let mut config = RunConfig::default();
        config.set("link", "nonlinear").unwrap();
        config.set("amplitude", "3.5").unwrap();
        let entries = config.entries();
        let mut rebuilt = RunConfig::default();
        for (k, v) in &entries {
            rebuilt.set(k, v).unwrap();
        }
        assert_eq!(rebuilt.entries(), entries);
    }
}
