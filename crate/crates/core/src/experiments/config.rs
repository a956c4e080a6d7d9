//! Experiment configuration: defaults, flat key=value files, validation.

use serde::Serialize;
use std::collections::BTreeMap;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("bad value {value:?} for key {key:?}")]
    BadValue { key: String, value: String },
    #[error("{0}")]
    Invalid(String),
    #[error("cannot read config file: {0}")]
    Io(#[from] std::io::Error),
}

/// Knobs shared by all experiment commands. A single master seed governs
/// every random decision.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentConfig {
    pub d: f64,
    pub n: u32,
    pub trials: u64,
    pub seed: u64,
    /// Clause-sharing parameter for correlated objects.
    pub t: f64,
    /// Neighborhood / tree half-depth.
    pub ell: u32,
    pub pop_size: usize,
    pub tol: f64,
    pub max_iter: u32,
    pub quad_k: u32,
    /// Monte Carlo samples for functional estimates and tree-law histograms.
    pub samples: u64,
    /// 0 = use the global thread pool.
    pub workers: usize,
    /// Branch-node budget per exact count; `None` disables the cap.
    pub budget: Option<u64>,
    pub d_grid: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
    /// Replace measured samples with standard normal draws (KS self-test).
    pub synthetic_normal: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            d: 1.0,
            n: 1000,
            trials: 100,
            seed: 1,
            t: 0.5,
            ell: 1,
            pop_size: 100_000,
            tol: 1e-3,
            max_iter: 200,
            quad_k: 21,
            samples: 1_000_000,
            workers: 0,
            budget: Some(20_000_000),
            d_grid: None,
            out: None,
            synthetic_normal: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.d > 0.0) {
            return Err(ConfigError::Invalid(format!("d must be positive, got {}", self.d)));
        }
        if self.n < 2 {
            return Err(ConfigError::Invalid(format!("n must be at least 2, got {}", self.n)));
        }
        if self.trials < 1 {
            return Err(ConfigError::Invalid("trials must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.t) {
            return Err(ConfigError::Invalid(format!("t must lie in [0,1], got {}", self.t)));
        }
        if self.pop_size == 0 {
            return Err(ConfigError::Invalid("pop-size must be positive".into()));
        }
        if let Some(grid) = &self.d_grid {
            if grid.iter().any(|&d| !(d > 0.0)) {
                return Err(ConfigError::Invalid("d-grid values must be positive".into()));
            }
        }
        Ok(())
    }

    /// Apply one `key=value` setting (file syntax and CLI share these names).
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = || ConfigError::BadValue {
            key: key.to_string(),
            value: value.to_string(),
        };
        match key {
            "d" => self.d = value.parse().map_err(|_| bad())?,
            "n" => self.n = value.parse().map_err(|_| bad())?,
            "trials" => self.trials = value.parse().map_err(|_| bad())?,
            "seed" => self.seed = value.parse().map_err(|_| bad())?,
            "t" => self.t = value.parse().map_err(|_| bad())?,
            "ell" => self.ell = value.parse().map_err(|_| bad())?,
            "pop-size" | "pop_size" => self.pop_size = value.parse().map_err(|_| bad())?,
            "tol" => self.tol = value.parse().map_err(|_| bad())?,
            "max-iter" | "max_iter" => self.max_iter = value.parse().map_err(|_| bad())?,
            "quad-k" | "quad_k" => self.quad_k = value.parse().map_err(|_| bad())?,
            "samples" => self.samples = value.parse().map_err(|_| bad())?,
            "workers" => self.workers = value.parse().map_err(|_| bad())?,
            "budget" => {
                self.budget = if value == "none" {
                    None
                } else {
                    Some(value.parse().map_err(|_| bad())?)
                }
            }
            "d-grid" | "d_grid" => {
                let grid: Result<Vec<f64>, _> =
                    value.split(',').map(|s| s.trim().parse()).collect();
                self.d_grid = Some(grid.map_err(|_| bad())?);
            }
            "out" => self.out = Some(PathBuf::from(value)),
            "synthetic-normal" | "synthetic_normal" => {
                self.synthetic_normal = value.parse().map_err(|_| bad())?
            }
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Parse a flat `key=value` config file (`#` starts a comment).
    pub fn apply_file(&mut self, path: &std::path::Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path)?;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ConfigError::Invalid(format!("line {}: expected key=value", lineno + 1))
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Stable echo of every field for report embedding.
    pub fn echo(&self) -> BTreeMap<String, serde_json::Value> {
        match serde_json::to_value(self) {
            Ok(serde_json::Value::Object(map)) => map.into_iter().collect(),
            _ => BTreeMap::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_overrides() {
        let dir = std::env::temp_dir().join("satclt-config-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("exp.cfg");
        std::fs::write(&path, "# comment\nd = 1.5\nn=300\ntrials=50\nd-grid=0.5,1.0\n").unwrap();
        let mut cfg = ExperimentConfig::default();
        cfg.apply_file(&path).unwrap();
        assert_eq!(cfg.d, 1.5);
        assert_eq!(cfg.n, 300);
        assert_eq!(cfg.d_grid, Some(vec![0.5, 1.0]));
        cfg.set("n", "400").unwrap();
        assert_eq!(cfg.n, 400);
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_bad_input() {
        let mut cfg = ExperimentConfig::default();
        assert!(matches!(cfg.set("nope", "1"), Err(ConfigError::UnknownKey(_))));
        assert!(cfg.set("d", "fast").is_err());
        cfg.d = -1.0;
        assert!(cfg.validate().is_err());
        cfg.d = 1.0;
        cfg.n = 1;
        assert!(cfg.validate().is_err());
    }
}
