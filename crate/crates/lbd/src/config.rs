//! Experiment configuration.
//!
//! A flat TOML table covering the training hyperparameters, the data source
//! (a pair of CSV files or the synthetic generator), the utility choice and
//! the evaluation settings. Every key is optional; unknown keys are errors.
//! Command-line flags are applied on top of the file and the merged result
//! is validated before any work starts.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use lbd_core::dataset::{SyntheticConfig, TailSplit};
use lbd_core::rebalance::{self, DiscrepancySpec};
use lbd_core::trainer::{EvalConfig, StepDecay, TrainConfig};
use lbd_core::utility::UtilityMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UtilityKind {
    OneHot,
    TailSensitive,
    File,
}

impl std::str::FromStr for UtilityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one-hot" => Ok(UtilityKind::OneHot),
            "tail-sensitive" => Ok(UtilityKind::TailSensitive),
            "file" => Ok(UtilityKind::File),
            other => Err(Error::Config(format!(
                "unknown utility '{other}' (expected one-hot, tail-sensitive or file)"
            ))),
        }
    }
}

impl std::fmt::Display for UtilityKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            UtilityKind::OneHot => "one-hot",
            UtilityKind::TailSensitive => "tail-sensitive",
            UtilityKind::File => "file",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Seed for data generation and training.
    pub seed: u64,
    pub out: PathBuf,

    /// CSV training set; the synthetic generator is used when unset.
    pub train_data: Option<PathBuf>,
    pub test_data: Option<PathBuf>,
    pub num_classes: usize,
    pub n_max: usize,
    pub imbalance_factor: f64,
    pub dim: usize,
    pub separation: f64,
    pub test_per_class: usize,

    pub utility: UtilityKind,
    pub rho: f64,
    /// Tail fraction used by the tail-sensitive utility.
    pub tail_ratio: f64,
    pub utility_file: Option<PathBuf>,

    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub lambda: f64,
    pub tau: f64,
    pub alpha: f64,
    pub particles: usize,
    pub epsilon: f64,
    pub repulsion: f64,
    pub ratio: String,
    pub gamma: f64,
    pub beta: f64,
    pub hidden: Vec<usize>,
    pub lr_decay_every: Option<usize>,
    pub lr_decay_factor: Option<f64>,

    pub tail_ratios: Vec<f64>,
    pub ece_bins: usize,
    /// Seeds per sweep cell.
    pub runs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        let s = SyntheticConfig::default();
        let e = EvalConfig::default();
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            train_data: None,
            test_data: None,
            num_classes: s.num_classes,
            n_max: s.n_max,
            imbalance_factor: s.imbalance_factor,
            dim: s.dim,
            separation: s.separation,
            test_per_class: s.test_per_class,
            utility: UtilityKind::OneHot,
            rho: 1.0,
            tail_ratio: 0.5,
            utility_file: None,
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            momentum: t.momentum,
            lambda: t.lambda,
            tau: t.tau,
            alpha: t.alpha,
            particles: t.particles,
            epsilon: t.epsilon,
            repulsion: t.repulsion,
            ratio: t.ratio.name().to_string(),
            gamma: rebalance::DEFAULT_GAMMA,
            beta: rebalance::DEFAULT_BETA,
            hidden: t.hidden_dims,
            lr_decay_every: None,
            lr_decay_factor: None,
            tail_ratios: e.tail_ratios,
            ece_bins: e.ece_bins,
            runs: 5,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn ratio_spec(&self) -> Result<DiscrepancySpec> {
        Ok(DiscrepancySpec::from_name(
            &self.ratio,
            self.gamma,
            self.beta,
        )?)
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let lr_decay = match (self.lr_decay_every, self.lr_decay_factor) {
            (None, None) => None,
            (Some(every), Some(factor)) => Some(StepDecay { every, factor }),
            _ => {
                return Err(Error::Config(
                    "lr_decay_every and lr_decay_factor must be set together".into(),
                ))
            }
        };
        let cfg = TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            lambda: self.lambda,
            tau: self.tau,
            alpha: self.alpha,
            particles: self.particles,
            epsilon: self.epsilon,
            repulsion: self.repulsion,
            seed: self.seed,
            ratio: self.ratio_spec()?,
            hidden_dims: self.hidden.clone(),
            lr_decay,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn synthetic_config(&self) -> SyntheticConfig {
        SyntheticConfig {
            num_classes: self.num_classes,
            n_max: self.n_max,
            imbalance_factor: self.imbalance_factor,
            dim: self.dim,
            separation: self.separation,
            test_per_class: self.test_per_class,
            seed: self.seed,
        }
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            tail_ratios: self.tail_ratios.clone(),
            ece_bins: self.ece_bins,
        }
    }

    /// Builds the configured utility matrix for `num_classes` classes.
    pub fn utility_matrix(&self, num_classes: usize) -> Result<UtilityMatrix> {
        let u = match self.utility {
            UtilityKind::OneHot => UtilityMatrix::one_hot(num_classes)?,
            UtilityKind::TailSensitive => {
                let split = TailSplit::new(num_classes, self.tail_ratio)?;
                UtilityMatrix::tail_sensitive(num_classes, &split, self.rho)?
            }
            UtilityKind::File => {
                let path = self
                    .utility_file
                    .as_deref()
                    .ok_or_else(|| Error::Config("utility = \"file\" needs utility_file".into()))?;
                crate::csvio::load_utility(path)?
            }
        };
        if u.num_classes() != num_classes {
            return Err(Error::Config(format!(
                "utility matrix is {0}x{0} but the data has {num_classes} classes",
                u.num_classes()
            )));
        }
        Ok(u)
    }

    /// Checks everything that can be checked without reading data files.
    pub fn validate(&self) -> Result<()> {
        self.train_config()?;
        if self.train_data.is_some() != self.test_data.is_some() {
            return Err(Error::Config(
                "train_data and test_data must be given together".into(),
            ));
        }
        if self.train_data.is_none() {
            let s = self.synthetic_config();
            lbd_core::dataset::profile_counts(s.num_classes, s.n_max, s.imbalance_factor)?;
            if s.dim == 0 || s.test_per_class == 0 || s.separation.is_nan() || s.separation < 0.0 {
                return Err(Error::Config(
                    "dim and test_per_class must be positive and separation non-negative".into(),
                ));
            }
        }
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return Err(Error::Config(format!(
                "rho must be finite and >= 0, got {}",
                self.rho
            )));
        }
        if !(self.tail_ratio > 0.0 && self.tail_ratio <= 1.0) {
            return Err(Error::Config(format!(
                "tail_ratio must lie in (0, 1], got {}",
                self.tail_ratio
            )));
        }
        if self.utility == UtilityKind::File && self.utility_file.is_none() {
            return Err(Error::Config(
                "utility = \"file\" needs utility_file".into(),
            ));
        }
        if self.tail_ratios.is_empty() || self.tail_ratios.iter().any(|r| !(*r > 0.0 && *r <= 1.0))
        {
            return Err(Error::Config(
                "tail_ratios must be non-empty, each in (0, 1]".into(),
            ));
        }
        if self.ece_bins == 0 {
            return Err(Error::Config("ece_bins must be positive".into()));
        }
        if self.runs == 0 {
            return Err(Error::Config("runs must be positive".into()));
        }
        Ok(())
    }
}
