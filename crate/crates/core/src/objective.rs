//! Minibatch training loss.
//!
//! For a batch `B` the minimization loss is
//!
//! ```text
//! total = -(1/|B|) sum_i w(y_i) (1/M) sum_j [ log p_j(y_i|x_i)
//!                                           + (1/alpha) sum_y' U[y'][y_i] log p_j(y'|x_i) ]
//!         + lambda * l2 - anneal * entropy
//! ```
//!
//! where `w` are the normalized discrepancy weights and the decision for a
//! training sample is its own label. The negated bracket is the variational
//! lower bound on the integrated gain (its constant dropped).

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::LongTailDataset;
use crate::ensemble::{self, ParticleEnsemble};
use crate::error::{check_dim, Error, Result};
use crate::net::{self, ParamVector};
use crate::rebalance::ClassWeights;
use crate::utility::UtilityMatrix;

/// Scalars entering the loss besides data, weights and utility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveConfig {
    /// Utility-term rescaling: the term is divided by `alpha`.
    pub alpha: f64,
    /// L2 coefficient.
    pub lambda: f64,
    /// Weight of the entropy (repulsion) term, in `[0, 1]`.
    pub anneal: f64,
    /// Variance floor of the entropy estimate.
    pub epsilon: f64,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            lambda: 5e-4,
            anneal: 1.0,
            epsilon: ensemble::DEFAULT_EPSILON,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub nll_term: f64,
    pub utility_term: f64,
    pub reg_l2: f64,
    pub reg_entropy: f64,
    /// `nll_term + utility_term + lambda * reg_l2 - anneal * reg_entropy`
    pub total: f64,
}

/// Importance weight applied to a sample with label `label`.
pub fn expectation_weighting(weights: &ClassWeights, label: usize) -> f64 {
    weights.normalized[label]
}

/// Loss plus per-particle gradient pieces, kept apart so callers can pick
/// the scaling of each.
pub(crate) struct LossParts {
    pub breakdown: LossBreakdown,
    /// Gradient of particle `j`'s own data loss, without the `1/M` factor.
    pub data_grads: Vec<ParamVector>,
    /// Gradient of the regularizer with respect to each particle.
    pub reg_grads: Vec<ParamVector>,
}

pub(crate) fn loss_parts(
    ens: &ParticleEnsemble,
    data: &LongTailDataset,
    batch: &[usize],
    weights: &ClassWeights,
    utility: &UtilityMatrix,
    cfg: &ObjectiveConfig,
) -> Result<LossParts> {
    if batch.is_empty() {
        return Err(Error::input("empty batch"));
    }
    if !cfg.alpha.is_finite() || cfg.alpha <= 0.0 {
        return Err(Error::input("alpha must be positive"));
    }
    let shape = ens.shape();
    let k = shape.num_classes();
    check_dim("feature vector", shape.input_dim(), data.dim())?;
    check_dim("dataset classes", k, data.num_classes())?;
    check_dim("class weights", k, weights.num_classes())?;
    check_dim("utility matrix", k, utility.num_classes())?;
    if let Some(&i) = batch.iter().find(|&&i| i >= data.len()) {
        return Err(Error::input(alloc::format!("batch index {i} out of range")));
    }

    let m = ens.num_particles();
    let b = batch.len() as f64;
    let inv_alpha = 1.0 / cfg.alpha;
    // columns[d] = U[.][d]
    let columns: Vec<Vec<f64>> = (0..k).map(|d| utility.column(d)).collect();

    let mut nll = vec![0.0; m];
    let mut util = vec![0.0; m];
    let mut data_grads: Vec<Vec<f64>> = vec![vec![0.0; shape.num_params()]; m];
    let mut cotangent = vec![0.0; k];

    for &i in batch {
        let (x, y) = (data.features(i), data.label(i));
        let w = weights.normalized[y];
        let column = &columns[y];
        let scale = -w / b;
        for (c, u) in cotangent.iter_mut().zip(column) {
            *c = scale * inv_alpha * u;
        }
        cotangent[y] += scale;

        for (j, particle) in ens.particles().iter().enumerate() {
            let trace = net::forward_unchecked(shape, particle.as_slice(), x);
            let lp = trace.logprobs();
            let sample_nll = scale * lp[y];
            let sample_util =
                scale * inv_alpha * column.iter().zip(lp).map(|(u, l)| u * l).sum::<f64>();
            if !(sample_nll.is_finite() && sample_util.is_finite()) {
                return Err(Error::NonFinite { index: i });
            }
            nll[j] += sample_nll;
            util[j] += sample_util;
            net::backward_accumulate(
                shape,
                particle.as_slice(),
                &trace,
                &cotangent,
                &mut data_grads[j],
            );
        }
    }

    let (reg, reg_grads) = ensemble::regularizer(ens, cfg.lambda, cfg.anneal, cfg.epsilon)?;
    let inv_m = 1.0 / m as f64;
    let nll_term = nll.iter().sum::<f64>() * inv_m;
    let utility_term = util.iter().sum::<f64>() * inv_m;
    let breakdown = LossBreakdown {
        nll_term,
        utility_term,
        reg_l2: reg.l2_term,
        reg_entropy: reg.entropy_term,
        total: nll_term + utility_term + reg.combined,
    };
    let data_grads = data_grads
        .into_iter()
        .map(|g| ParamVector::from_vec(shape, g).map_err(|_| Error::NonFinite { index: batch[0] }))
        .collect::<Result<Vec<_>>>()?;
    Ok(LossParts {
        breakdown,
        data_grads,
        reg_grads,
    })
}

/// Loss on `batch` (indices into `data`) and its gradient with respect to
/// every particle.
pub fn batch_loss(
    ens: &ParticleEnsemble,
    data: &LongTailDataset,
    batch: &[usize],
    weights: &ClassWeights,
    utility: &UtilityMatrix,
    cfg: &ObjectiveConfig,
) -> Result<(LossBreakdown, Vec<ParamVector>)> {
    let parts = loss_parts(ens, data, batch, weights, utility, cfg)?;
    let inv_m = 1.0 / ens.num_particles() as f64;
    let grads = parts
        .data_grads
        .into_iter()
        .zip(parts.reg_grads)
        .map(|(mut g, r)| {
            for (a, b) in g.as_mut_slice().iter_mut().zip(r.as_slice()) {
                *a = *a * inv_m + b;
            }
            g
        })
        .collect();
    Ok((parts.breakdown, grads))
}
