//! Particle approximation of the parameter posterior.
//!
//! `q(theta) = sum_j w_j delta(theta - theta_j)`. The regularizer is the
//! Gaussian-prior KL divergence up to constants: an L2 term on every
//! particle minus an entropy estimate built from the diagonal
//! cross-particle covariance, which acts as a repulsive force.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::LongTailDataset;
use crate::error::{check_dim, Error, Result};
use crate::net::{self, NetShape, ParamVector};
use crate::rng;

/// Default variance floor inside the entropy logarithm.
pub const DEFAULT_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleEnsemble {
    shape: NetShape,
    particles: Vec<ParamVector>,
    mixture_weights: Vec<f64>,
}

impl ParticleEnsemble {
    /// Ensemble with uniform mixture weights.
    pub fn new(shape: NetShape, particles: Vec<ParamVector>) -> Result<Self> {
        let m = particles.len();
        Self::with_weights(shape, particles, vec![1.0 / m as f64; m])
    }

    pub fn with_weights(
        shape: NetShape,
        particles: Vec<ParamVector>,
        mixture_weights: Vec<f64>,
    ) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::input("an ensemble needs at least one particle"));
        }
        check_dim("mixture weights", particles.len(), mixture_weights.len())?;
        let p = shape.num_params();
        for particle in &particles {
            check_dim("particle", p, particle.len())?;
        }
        if mixture_weights.iter().any(|w| w.is_nan() || *w < 0.0) {
            return Err(Error::input("mixture weights must be non-negative"));
        }
        let total: f64 = mixture_weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::input(alloc::format!(
                "mixture weights sum to {total}, expected 1"
            )));
        }
        Ok(Self {
            shape,
            particles,
            mixture_weights,
        })
    }

    /// `num_particles` independently initialized particles. Particle `j`
    /// draws from its own stream derived from `(seed, j)`.
    pub fn random(shape: NetShape, num_particles: usize, seed: u64) -> Result<Self> {
        let particles = (0..num_particles)
            .map(|j| ParamVector::random(&shape, &mut rng::stream(seed, rng::TAG_INIT, j as u64)))
            .collect();
        Self::new(shape, particles)
    }

    pub fn shape(&self) -> &NetShape {
        &self.shape
    }

    pub fn num_particles(&self) -> usize {
        self.particles.len()
    }

    pub fn particles(&self) -> &[ParamVector] {
        &self.particles
    }

    /// Mutable particle access for optimizers. Callers keep entries finite.
    pub fn particles_mut(&mut self) -> &mut [ParamVector] {
        &mut self.particles
    }

    pub fn mixture_weights(&self) -> &[f64] {
        &self.mixture_weights
    }

    pub fn into_particles(self) -> Vec<ParamVector> {
        self.particles
    }
}

/// Per-particle log-probabilities and the mixture predictive distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// `M x K`
    pub per_particle: Vec<Vec<f64>>,
    /// `K` probabilities.
    pub mixture: Vec<f64>,
}

pub fn predictive_logprobs(ens: &ParticleEnsemble, x: &[f64]) -> Result<Prediction> {
    check_dim("feature vector", ens.shape.input_dim(), x.len())?;
    let per_particle: Vec<Vec<f64>> = ens
        .particles
        .iter()
        .map(|p| net::forward_unchecked(&ens.shape, p.as_slice(), x).into_logprobs())
        .collect();
    let mixture = mixture_from_logprobs(&per_particle, &ens.mixture_weights);
    Ok(Prediction {
        per_particle,
        mixture,
    })
}

pub(crate) fn mixture_from_logprobs(per_particle: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    let k = per_particle[0].len();
    let mut mixture = vec![0.0; k];
    for (lp, w) in per_particle.iter().zip(weights) {
        for (m, l) in mixture.iter_mut().zip(lp) {
            *m += w * libm::exp(*l);
        }
    }
    mixture
}

/// `(1/M) sum_j ||theta_j||^2`
pub fn l2_term(ens: &ParticleEnsemble) -> f64 {
    let m = ens.num_particles() as f64;
    ens.particles
        .iter()
        .map(ParamVector::squared_norm)
        .sum::<f64>()
        / m
}

/// Per-coordinate mean and population variance across particles.
fn coordinate_moments(ens: &ParticleEnsemble) -> (Vec<f64>, Vec<f64>) {
    let p = ens.shape.num_params();
    let m = ens.num_particles() as f64;
    let mut mean = vec![0.0; p];
    for particle in &ens.particles {
        for (a, v) in mean.iter_mut().zip(particle.as_slice()) {
            *a += v;
        }
    }
    for a in mean.iter_mut() {
        *a /= m;
    }
    let mut var = vec![0.0; p];
    for particle in &ens.particles {
        for ((s, v), mu) in var.iter_mut().zip(particle.as_slice()).zip(&mean) {
            let d = v - mu;
            *s += d * d;
        }
    }
    for s in var.iter_mut() {
        *s /= m;
    }
    (mean, var)
}

/// `1/2 sum_k log(var_k + epsilon)` with the population variance of each
/// coordinate across particles. Zero for a single particle.
pub fn entropy_term(ens: &ParticleEnsemble, epsilon: f64) -> f64 {
    if ens.num_particles() < 2 {
        log::warn!("entropy term is undefined for a single particle; using 0");
        return 0.0;
    }
    entropy_value(ens, epsilon)
}

fn entropy_value(ens: &ParticleEnsemble, epsilon: f64) -> f64 {
    if ens.num_particles() < 2 {
        return 0.0;
    }
    let (_, var) = coordinate_moments(ens);
    0.5 * var.iter().map(|v| libm::log(v + epsilon)).sum::<f64>()
}

/// Gradient of [`entropy_term`] for every particle:
/// `(theta_jk - mean_k) / (M (var_k + epsilon))`.
pub fn entropy_gradient(ens: &ParticleEnsemble, epsilon: f64) -> Vec<ParamVector> {
    let m = ens.num_particles();
    if m < 2 {
        return vec![ParamVector::zeros(&ens.shape); m];
    }
    let (mean, var) = coordinate_moments(ens);
    let denom: Vec<f64> = var.iter().map(|v| m as f64 * (v + epsilon)).collect();
    ens.particles
        .iter()
        .map(|particle| {
            let g = particle
                .as_slice()
                .iter()
                .zip(&mean)
                .zip(&denom)
                .map(|((v, mu), d)| (v - mu) / d)
                .collect();
            ParamVector::from_vec(&ens.shape, g).expect("finite gradient")
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizerValue {
    pub l2_term: f64,
    pub entropy_term: f64,
    /// `lambda * l2_term - anneal * entropy_term`
    pub combined: f64,
    pub epsilon: f64,
}

/// Regularizer value and its gradient for each particle:
/// `(2 lambda / M) theta_j - anneal * grad_j H`.
pub fn regularizer(
    ens: &ParticleEnsemble,
    lambda: f64,
    anneal: f64,
    epsilon: f64,
) -> Result<(RegularizerValue, Vec<ParamVector>)> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::input("lambda must be finite and >= 0"));
    }
    if !(0.0..=1.0).contains(&anneal) {
        return Err(Error::input("anneal weight must lie in [0, 1]"));
    }
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(Error::input("epsilon must be positive"));
    }
    let m = ens.num_particles() as f64;
    let l2 = l2_term(ens);
    let entropy = if anneal > 0.0 {
        entropy_term(ens, epsilon)
    } else {
        entropy_value(ens, epsilon)
    };
    let value = RegularizerValue {
        l2_term: l2,
        entropy_term: entropy,
        combined: lambda * l2 - anneal * entropy,
        epsilon,
    };
    let entropy_grads = entropy_gradient(ens, epsilon);
    let decay = 2.0 * lambda / m;
    let grads = ens
        .particles
        .iter()
        .zip(entropy_grads)
        .map(|(particle, mut h)| {
            for (g, v) in h.as_mut_slice().iter_mut().zip(particle.as_slice()) {
                *g = decay * v - anneal * *g;
            }
            h
        })
        .collect();
    Ok((value, grads))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DiversityDiagnostics {
    /// Mean Euclidean distance over particle pairs.
    pub mean_param_distance: f64,
    /// Fraction of inputs where two particles' argmax classes differ,
    /// averaged over particle pairs.
    pub mean_disagreement: f64,
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub fn diversity_diagnostics(
    ens: &ParticleEnsemble,
    data: &LongTailDataset,
) -> Result<DiversityDiagnostics> {
    check_dim("feature vector", ens.shape.input_dim(), data.dim())?;
    let m = ens.num_particles();
    if m < 2 {
        return Ok(DiversityDiagnostics::default());
    }
    let pairs = (m * (m - 1) / 2) as f64;
    let mut dist = 0.0;
    for j in 0..m {
        for l in j + 1..m {
            let sq: f64 = ens.particles[j]
                .as_slice()
                .iter()
                .zip(ens.particles[l].as_slice())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            dist += libm::sqrt(sq);
        }
    }
    let mut disagree = 0usize;
    for (x, _) in data.iter() {
        let votes: Vec<usize> = ens
            .particles
            .iter()
            .map(|p| argmax(net::forward_unchecked(&ens.shape, p.as_slice(), x).logprobs()))
            .collect();
        for j in 0..m {
            for l in j + 1..m {
                disagree += usize::from(votes[j] != votes[l]);
            }
        }
    }
    let mean_disagreement = if data.is_empty() {
        0.0
    } else {
        disagree as f64 / (pairs * data.len() as f64)
    };
    Ok(DiversityDiagnostics {
        mean_param_distance: dist / pairs,
        mean_disagreement,
    })
}
