//! 256-bit reference computations for the numerically delicate pieces.

mod common;

use common::wide::{w, W};
use common::*;
use lbd_core::dataset::LongTailDataset;
use lbd_core::ensemble::{self, predictive_logprobs, ParticleEnsemble};
use lbd_core::net::{forward_logprobs, NetShape};
use lbd_core::objective::{batch_loss, ObjectiveConfig};
use lbd_core::rebalance::{class_weights, DiscrepancySpec};
use lbd_core::utility::UtilityMatrix;
use rand::Rng;

fn log_softmax_wide(logits: &[W]) -> Vec<W> {
    let max = logits
        .iter()
        .cloned()
        .fold(logits[0].clone(), |a, b| if b > a { b } else { a });
    let mut sum = w(0.0);
    for z in logits {
        sum += (z.clone() - max.clone()).exp();
    }
    let lse = max + sum.ln();
    logits.iter().map(|z| z.clone() - lse.clone()).collect()
}

fn forward_wide(shape: &NetShape, theta: &[f64], x: &[f64]) -> Vec<W> {
    let mut a: Vec<W> = x.iter().map(|&v| w(v)).collect();
    let layers = shape.layers();
    for (li, l) in layers.iter().enumerate() {
        let weights = &theta[l.offset..l.offset + l.fan_in * l.fan_out];
        let bias = &theta[l.offset + l.fan_in * l.fan_out..l.offset + l.len()];
        let z: Vec<W> = (0..l.fan_out)
            .map(|o| {
                let mut s = w(bias[o]);
                for i in 0..l.fan_in {
                    s += w(weights[o * l.fan_in + i]) * a[i].clone();
                }
                s
            })
            .collect();
        a = if li + 1 < layers.len() {
            z.iter().map(W::tanh).collect()
        } else {
            z
        };
    }
    log_softmax_wide(&a)
}

#[test]
fn reference_arithmetic() {
    assert!(w(1.0).exp().close_to(std::f64::consts::E, 4.5e-16));
    assert!(w(2.0).ln().close_to(std::f64::consts::LN_2, 1.2e-16));
    assert!(w(0.5).tanh().close_to(0.5f64.tanh(), 1e-16));
    let third = w(1.0) / w(3.0);
    assert!((third.clone() * w(3.0) - w(1.0)).abs() < w(1e-70));
}

#[test]
fn forward_pass() {
    let mut rng = rng(10);
    for trial in 0..200 {
        let k = rng.random_range(2..6);
        let shape = NetShape::new(
            rng.random_range(1..5),
            vec![rng.random_range(1..7); trial % 3],
            k,
        )
        .unwrap();
        let scale = if trial % 4 == 0 { 8.0 } else { 1.0 };
        let ens = random_ensemble(&mut rng, &shape, 1, scale);
        let x = uniform_vec(&mut rng, shape.input_dim(), -3.0, 3.0);
        let lp = forward_logprobs(&shape, &ens.particles()[0], &x).unwrap();
        let reference = forward_wide(&shape, ens.particles()[0].as_slice(), &x);
        for (a, r) in lp.iter().zip(&reference) {
            let tol = 1e-13 * r.approx().abs().max(1.0);
            assert!(r.close_to(*a, tol), "trial {trial}: {a} vs {}", r.approx());
        }
    }
}

#[test]
fn effective_number_form() {
    for beta in [0.9, 0.99, 0.999, 0.9999, 0.99999, 0.999999, 1.0 - 1e-9] {
        let spec = DiscrepancySpec::Effective { beta };
        for n in [1usize, 2, 3, 7, 50, 1000, 12345, 1_000_000] {
            let got = spec.f_value(n).unwrap();
            let b = w(beta);
            let reference = (w(1.0) - b.powi(n)) / (w(1.0) - b);
            let tol = 1e-13 * reference.approx();
            assert!(
                reference.close_to(got, tol),
                "beta {beta} n {n}: {got} vs {}",
                reference.approx()
            );
        }
    }
}

#[test]
fn mixture_probabilities() {
    let mut rng = rng(11);
    let shape = NetShape::new(3, vec![5], 4).unwrap();
    for _ in 0..100 {
        let m = rng.random_range(1..6);
        let ens = random_ensemble(&mut rng, &shape, m, 3.0);
        let x = uniform_vec(&mut rng, 3, -2.0, 2.0);
        let pred = predictive_logprobs(&ens, &x).unwrap();
        let per: Vec<Vec<W>> = ens
            .particles()
            .iter()
            .map(|p| forward_wide(&shape, p.as_slice(), &x))
            .collect();
        for c in 0..4 {
            let mut s = w(0.0);
            for lp in &per {
                s += lp[c].exp();
            }
            let reference = s / w(m as f64);
            assert!(reference.close_to(pred.mixture[c], 1e-15));
        }
        let total: f64 = pred.mixture.iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
    }
}

fn batch_loss_wide(
    ens: &ParticleEnsemble,
    data: &LongTailDataset,
    batch: &[usize],
    weights: &[f64],
    u: &UtilityMatrix,
    cfg: &ObjectiveConfig,
) -> W {
    let shape = ens.shape();
    let m = w(ens.num_particles() as f64);
    let k = shape.num_classes();
    let mut data_term = w(0.0);
    for &i in batch {
        let y = data.label(i);
        let mut inner = w(0.0);
        for p in ens.particles() {
            let lp = forward_wide(shape, p.as_slice(), data.features(i));
            let mut util = w(0.0);
            for (yp, l) in lp.iter().enumerate().take(k) {
                util += w(u.get(yp, y)) * l.clone();
            }
            inner += lp[y].clone() + util / w(cfg.alpha);
        }
        data_term += w(weights[y]) * inner / m.clone();
    }
    let data_term = -data_term / w(batch.len() as f64);
    let mut l2 = w(0.0);
    for v in ens.particles().iter().flat_map(|q| q.as_slice().iter()) {
        l2 += w(*v) * w(*v);
    }
    let l2 = l2 / m.clone();
    let mut entropy = w(0.0);
    if ens.num_particles() >= 2 {
        for c in 0..shape.num_params() {
            let mut mean = w(0.0);
            for q in ens.particles() {
                mean += w(q.as_slice()[c]);
            }
            let mean = mean / m.clone();
            let mut var = w(0.0);
            for q in ens.particles() {
                let d = w(q.as_slice()[c]) - mean.clone();
                var += d.clone() * d;
            }
            let var = var / m.clone();
            entropy += (var + w(cfg.epsilon)).ln() * w(0.5);
        }
    }
    data_term + w(cfg.lambda) * l2 - w(cfg.anneal) * entropy
}

#[test]
fn batch_loss_value() {
    let mut rng = rng(12);
    let shape = NetShape::new(2, vec![6], 3).unwrap();
    for trial in 0..100 {
        let m = rng.random_range(1..5);
        let ens = random_ensemble(&mut rng, &shape, m, 1.5);
        let data = random_dataset(&mut rng, 10, 2, 3);
        let batch: Vec<usize> = (0..rng.random_range(1..10))
            .map(|_| rng.random_range(0..10))
            .collect();
        let counts: Vec<usize> = (0..3).map(|_| rng.random_range(1..500)).collect();
        let weights = class_weights(&random_spec(&mut rng), &counts).unwrap();
        let utility = random_utility(&mut rng, 3);
        let cfg = ObjectiveConfig {
            alpha: rng.random_range(0.2..5.0),
            lambda: rng.random_range(0.0..0.01),
            anneal: if m > 1 {
                rng.random_range(0.0..1.0)
            } else {
                0.0
            },
            epsilon: ensemble::DEFAULT_EPSILON,
        };
        let (loss, _) = batch_loss(&ens, &data, &batch, &weights, &utility, &cfg).unwrap();
        let reference = batch_loss_wide(&ens, &data, &batch, &weights.normalized, &utility, &cfg);
        let tol = 1e-12 * reference.approx().abs().max(1.0);
        assert!(
            reference.close_to(loss.total, tol),
            "trial {trial}: {} vs {}",
            loss.total,
            reference.approx()
        );
    }
}
