//! Run configuration. A JSON file and command-line flags share the keys
//! below; flags win.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{check_alpha, domain, Error, Result};

/// Optional settings as read from a file or from flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: Option<String>,
    pub alpha: Option<f64>,
    pub theta: Option<f64>,
    pub n: Option<usize>,
    pub eps: Option<f64>,
    pub horizon: Option<f64>,
    pub replicates: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub tolerance: Option<f64>,
    pub workers: Option<usize>,
}

impl ConfigFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line(), msg: e.to_string() })
    }

    /// Values set in `top` replace those in `self`.
    pub fn overlay(self, top: ConfigFile) -> ConfigFile {
        ConfigFile {
            experiment: top.experiment.or(self.experiment),
            alpha: top.alpha.or(self.alpha),
            theta: top.theta.or(self.theta),
            n: top.n.or(self.n),
            eps: top.eps.or(self.eps),
            horizon: top.horizon.or(self.horizon),
            replicates: top.replicates.or(self.replicates),
            seed: top.seed.or(self.seed),
            out: top.out.or(self.out),
            tolerance: top.tolerance.or(self.tolerance),
            workers: top.workers.or(self.workers),
        }
    }

    /// Checks ranges and demands a seed.
    pub fn resolve(self, experiment: &str) -> Result<ExperimentConfig> {
        let seed = match self.seed {
            Some(s) => s,
            None => return domain("a seed is required (flag --seed or key \"seed\")"),
        };
        let cfg = ExperimentConfig {
            experiment: experiment.to_string(),
            alpha: self.alpha,
            theta: self.theta,
            n: self.n,
            eps: self.eps,
            horizon: self.horizon,
            replicates: self.replicates,
            seed,
            out: self.out,
            tolerance: self.tolerance,
            workers: self.workers,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// A validated run request. Unset options fall back to each experiment's
/// documented defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub alpha: Option<f64>,
    pub theta: Option<f64>,
    pub n: Option<usize>,
    pub eps: Option<f64>,
    pub horizon: Option<f64>,
    pub replicates: Option<usize>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    /// Replaces the experiment's main threshold: the relative band for
    /// estimate checks, the significance level for test-only experiments.
    pub tolerance: Option<f64>,
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(experiment: impl Into<String>, seed: u64) -> Self {
        Self {
            experiment: experiment.into(),
            alpha: None,
            theta: None,
            n: None,
            eps: None,
            horizon: None,
            replicates: None,
            seed,
            out: None,
            tolerance: None,
            workers: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(a) = self.alpha {
            check_alpha(a)?;
        }
        if self.theta.is_some_and(|t| !(t >= 0.0 && t.is_finite())) {
            return domain("theta must be finite and non-negative");
        }
        if self.eps.is_some_and(|e| !(e > 0.0 && e < 1.0)) {
            return domain("eps must lie in (0, 1)");
        }
        if self.horizon.is_some_and(|h| !(h > 0.0 && h.is_finite())) {
            return domain("horizon must be positive and finite");
        }
        if self.n.is_some_and(|n| n < 2) {
            return domain("n must be at least 2");
        }
        if self.replicates == Some(0) {
            return domain("replicates must be positive");
        }
        if self.tolerance.is_some_and(|t| !(t > 0.0 && t < 1.0)) {
            return domain("tolerance must lie in (0, 1)");
        }
        if self.workers == Some(0) {
            return domain("workers must be positive");
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
