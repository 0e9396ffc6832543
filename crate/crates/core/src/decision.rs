//! Expected-gain decisions at test time.
//!
//! The gain of deciding `d` for input `x` is
//! `(1/M) sum_j sum_y' U[y'][d] log p_j(y'|x)`, the log of the product-form
//! decision gain averaged over particles. The decision maximizes it.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::LongTailDataset;
use crate::ensemble::{self, argmax, ParticleEnsemble};
use crate::error::{check_dim, Result};
use crate::utility::UtilityMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionOutput {
    /// Gain-maximizing class, lowest id on ties.
    pub decision: usize,
    pub expected_gains: Vec<f64>,
    /// Argmax of the mixture predictive distribution.
    pub argmax_pred: usize,
    /// Mixture predictive distribution.
    pub mixture: Vec<f64>,
}

impl DecisionOutput {
    /// Mixture probability of the decided class.
    pub fn confidence(&self) -> f64 {
        self.mixture[self.decision]
    }
}

/// Expected gains for every decision from per-particle log-probabilities.
pub fn expected_gains(per_particle: &[Vec<f64>], utility: &UtilityMatrix) -> Vec<f64> {
    let k = utility.num_classes();
    let m = per_particle.len() as f64;
    let mut mean_logp = vec![0.0; k];
    for lp in per_particle {
        for (a, l) in mean_logp.iter_mut().zip(lp) {
            *a += l;
        }
    }
    for a in mean_logp.iter_mut() {
        *a /= m;
    }
    let mut gains = vec![0.0; k];
    for (row, lp) in utility.rows().zip(&mean_logp) {
        for (g, u) in gains.iter_mut().zip(row) {
            // skip exact zeros so that u = 0 with log p = -inf contributes nothing
            if *u != 0.0 {
                *g += u * lp;
            }
        }
    }
    gains
}

pub fn decide(
    ens: &ParticleEnsemble,
    utility: &UtilityMatrix,
    x: &[f64],
) -> Result<DecisionOutput> {
    check_dim(
        "utility matrix",
        ens.shape().num_classes(),
        utility.num_classes(),
    )?;
    let pred = ensemble::predictive_logprobs(ens, x)?;
    let gains = expected_gains(&pred.per_particle, utility);
    Ok(DecisionOutput {
        decision: argmax(&gains),
        argmax_pred: argmax(&pred.mixture),
        expected_gains: gains,
        mixture: pred.mixture,
    })
}

/// [`decide`] for every sample, in dataset order.
pub fn decide_batch(
    ens: &ParticleEnsemble,
    utility: &UtilityMatrix,
    data: &LongTailDataset,
) -> Result<Vec<DecisionOutput>> {
    data.iter().map(|(x, _)| decide(ens, utility, x)).collect()
}
