//! Train/test discrepancy weights.
//!
//! With a uniform test distribution the importance ratio
//! `p_test(y) / p_train(y)` is proportional to `1 / f(n_y)` for some
//! increasing `f` of the class count. Each supported `f` corresponds to a
//! classic re-balancing scheme.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default `beta` of the effective-number form.
pub const DEFAULT_BETA: f64 = 0.9999;
/// Default exponent of the power form.
pub const DEFAULT_GAMMA: f64 = 1.0;

/// Choice of `f(n_y)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "lowercase")]
pub enum DiscrepancySpec {
    /// `f(n) = n`
    #[default]
    Linear,
    /// `f(n) = n^gamma`
    Power { gamma: f64 },
    /// `f(n) = (1 - beta^n) / (1 - beta)`
    Effective { beta: f64 },
    /// `f(n) = sqrt(n)`
    Sqrt,
    /// `f(n) = ln(1 + n)`
    Log,
    /// `f(n) = 1`
    Plain,
}

impl DiscrepancySpec {
    pub fn power(gamma: f64) -> Result<Self> {
        let spec = DiscrepancySpec::Power { gamma };
        spec.validate()?;
        Ok(spec)
    }

    pub fn effective(beta: f64) -> Result<Self> {
        let spec = DiscrepancySpec::Effective { beta };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DiscrepancySpec::Power { gamma } if !(gamma > 0.0 && gamma.is_finite()) => Err(
                Error::input(format!("power form needs gamma > 0, got {gamma}")),
            ),
            DiscrepancySpec::Effective { beta } if !(beta > 0.0 && beta < 1.0) => Err(
                Error::input(format!("effective form needs 0 < beta < 1, got {beta}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DiscrepancySpec::Linear => "linear",
            DiscrepancySpec::Power { .. } => "power",
            DiscrepancySpec::Effective { .. } => "effective",
            DiscrepancySpec::Sqrt => "sqrt",
            DiscrepancySpec::Log => "log",
            DiscrepancySpec::Plain => "plain",
        }
    }

    /// Parses a form name, filling in `gamma` / `beta` for the forms that
    /// take them.
    pub fn from_name(name: &str, gamma: f64, beta: f64) -> Result<Self> {
        let spec = match name {
            "linear" => DiscrepancySpec::Linear,
            "power" => DiscrepancySpec::Power { gamma },
            "effective" => DiscrepancySpec::Effective { beta },
            "sqrt" => DiscrepancySpec::Sqrt,
            "log" => DiscrepancySpec::Log,
            "plain" => DiscrepancySpec::Plain,
            other => {
                return Err(Error::input(format!(
                    "unknown discrepancy ratio '{other}' (expected linear, power, effective, sqrt, log or plain)"
                )))
            }
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `f(n)` for a class with `n >= 1` samples.
    pub fn f_value(&self, n: usize) -> Result<f64> {
        self.validate()?;
        if n == 0 {
            return Err(Error::input("f(n) is undefined for an empty class"));
        }
        let x = n as f64;
        Ok(match *self {
            DiscrepancySpec::Linear => x,
            DiscrepancySpec::Power { gamma } => libm::pow(x, gamma),
            DiscrepancySpec::Effective { beta } => {
                // 1 - beta^n = -expm1(n ln beta); beta - 1 is exact for beta in [0.5, 1)
                let log_beta = if beta >= 0.5 {
                    libm::log1p(beta - 1.0)
                } else {
                    libm::log(beta)
                };
                -libm::expm1(x * log_beta) / (1.0 - beta)
            }
            DiscrepancySpec::Sqrt => libm::sqrt(x),
            DiscrepancySpec::Log => libm::log1p(x),
            DiscrepancySpec::Plain => 1.0,
        })
    }
}

impl fmt::Display for DiscrepancySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiscrepancySpec::Power { gamma } => write!(f, "power(gamma={gamma})"),
            DiscrepancySpec::Effective { beta } => write!(f, "effective(beta={beta})"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for DiscrepancySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DiscrepancySpec::from_name(s, DEFAULT_GAMMA, DEFAULT_BETA)
    }
}

/// Per-class discrepancy weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    /// `1 / f(n_k)`.
    pub raw: Vec<f64>,
    /// `raw` rescaled so the mean weight over training samples is 1.
    pub normalized: Vec<f64>,
}

impl ClassWeights {
    pub fn num_classes(&self) -> usize {
        self.raw.len()
    }

    /// Growth of the raw weight from the first to the last class, in percent.
    pub fn growth_rate(&self) -> f64 {
        let first = self.raw[0];
        let last = self.raw[self.raw.len() - 1];
        (last / first - 1.0) * 100.0
    }

    /// Unit weights for `num_classes` classes.
    pub fn uniform(num_classes: usize) -> Self {
        Self {
            raw: alloc::vec![1.0; num_classes],
            normalized: alloc::vec![1.0; num_classes],
        }
    }
}

/// Computes raw and normalized weights for the given class counts.
pub fn class_weights(spec: &DiscrepancySpec, counts: &[usize]) -> Result<ClassWeights> {
    if counts.is_empty() {
        return Err(Error::input("no classes"));
    }
    if let Some(k) = counts.iter().position(|&n| n == 0) {
        return Err(Error::input(format!(
            "class {k} has no training samples; every class needs n >= 1"
        )));
    }
    let raw = counts
        .iter()
        .map(|&n| spec.f_value(n).map(|f| 1.0 / f))
        .collect::<Result<Vec<_>>>()?;
    let total: f64 = counts.iter().map(|&n| n as f64).sum();
    let weighted: f64 = counts.iter().zip(&raw).map(|(&n, r)| n as f64 * r).sum();
    let scale = total / weighted;
    let normalized = raw.iter().map(|r| r * scale).collect();
    Ok(ClassWeights { raw, normalized })
}

/// `(raw[K-1] / raw[0] - 1) * 100`.
pub fn growth_rate(weights: &ClassWeights) -> Result<f64> {
    if weights.num_classes() < 2 {
        return Err(Error::input("growth rate needs at least 2 classes"));
    }
    Ok(weights.growth_rate())
}
