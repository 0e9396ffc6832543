#![allow(dead_code)]

pub mod wide;

use lbd_core::dataset::{LongTailDataset, Split, TailSplit};
use lbd_core::ensemble::ParticleEnsemble;
use lbd_core::net::{NetShape, ParamVector};
use lbd_core::rebalance::DiscrepancySpec;
use lbd_core::utility::UtilityMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_vec(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

pub fn random_ensemble(
    rng: &mut impl Rng,
    shape: &NetShape,
    m: usize,
    scale: f64,
) -> ParticleEnsemble {
    let p = shape.num_params();
    let particles = (0..m)
        .map(|_| ParamVector::from_vec(shape, uniform_vec(rng, p, -scale, scale)).unwrap())
        .collect();
    ParticleEnsemble::new(shape.clone(), particles).unwrap()
}

/// Random dataset where every class appears at least once.
pub fn random_dataset(rng: &mut impl Rng, n: usize, dim: usize, k: usize) -> LongTailDataset {
    let labels: Vec<usize> = (0..n)
        .map(|i| if i < k { i } else { rng.random_range(0..k) })
        .collect();
    let features = uniform_vec(rng, n * dim, -2.0, 2.0);
    LongTailDataset::new(dim, k, features, labels, Split::Train).unwrap()
}

pub fn random_utility(rng: &mut impl Rng, k: usize) -> UtilityMatrix {
    match rng.random_range(0..4) {
        0 => UtilityMatrix::one_hot(k).unwrap(),
        1 => {
            let split = TailSplit::new(k, rng.random_range(0.2..0.8)).unwrap();
            UtilityMatrix::tail_sensitive(k, &split, rng.random_range(0.0..3.0)).unwrap()
        }
        2 => UtilityMatrix::zeros(k).unwrap(),
        _ => {
            let mut rows: Vec<Vec<f64>> = (0..k).map(|_| uniform_vec(rng, k, -1.0, 1.0)).collect();
            for (i, row) in rows.iter_mut().enumerate() {
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                row[i] = max + rng.random_range(0.0..0.5);
            }
            UtilityMatrix::from_rows(rows).unwrap()
        }
    }
}

pub fn random_spec(rng: &mut impl Rng) -> DiscrepancySpec {
    match rng.random_range(0..6) {
        0 => DiscrepancySpec::Linear,
        1 => DiscrepancySpec::Power {
            gamma: rng.random_range(0.2..2.0),
        },
        2 => DiscrepancySpec::Effective {
            beta: rng.random_range(0.9..0.99999),
        },
        3 => DiscrepancySpec::Sqrt,
        4 => DiscrepancySpec::Log,
        _ => DiscrepancySpec::Plain,
    }
}

/// Central differences of `f` at `x` with step `h`.
pub fn central_diff(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `||a - b|| / max(||a||, ||b||)`, 0 when both vanish.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

/// Flattens particles into one vector and back.
pub fn flatten(ens: &ParticleEnsemble) -> Vec<f64> {
    ens.particles()
        .iter()
        .flat_map(|p| p.as_slice().to_vec())
        .collect()
}

pub fn unflatten(like: &ParticleEnsemble, flat: &[f64]) -> ParticleEnsemble {
    let shape = like.shape().clone();
    let p = shape.num_params();
    let particles = flat
        .chunks(p)
        .map(|c| ParamVector::from_vec(&shape, c.to_vec()).unwrap())
        .collect();
    ParticleEnsemble::new(shape, particles).unwrap()
}

/// Brute-force FHR: counts every tail-labelled sample by enumeration.
pub fn fhr_brute(decisions: &[usize], labels: &[usize], split: &TailSplit) -> f64 {
    let tail: Vec<usize> = split.tail().collect();
    let head: Vec<usize> = split.head().collect();
    let th = decisions
        .iter()
        .zip(labels)
        .filter(|(d, y)| tail.contains(y) && head.contains(d))
        .count();
    let tt = decisions
        .iter()
        .zip(labels)
        .filter(|(d, y)| tail.contains(y) && tail.contains(d))
        .count();
    if th + tt == 0 {
        0.0
    } else {
        th as f64 / (th + tt) as f64
    }
}

/// All-pairs AUC: P(u_wrong > u_right) + 0.5 P(tie).
pub fn auc_brute(u: &[f64], correct: &[bool]) -> Option<f64> {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for i in 0..u.len() {
        for j in 0..u.len() {
            if !correct[i] && correct[j] {
                pairs += 1.0;
                if u[i] > u[j] {
                    wins += 1.0;
                } else if u[i] == u[j] {
                    wins += 0.5;
                }
            }
        }
    }
    (pairs > 0.0).then(|| wins / pairs)
}

/// Per-bin enumeration ECE with bins `(b/B, (b+1)/B]`, zero in bin 0.
pub fn ece_brute(conf: &[f64], correct: &[bool], bins: usize) -> f64 {
    let n = conf.len() as f64;
    let nb = bins as f64;
    let mut ece = 0.0;
    for b in 0..bins {
        let lo = b as f64 / nb;
        let hi = (b + 1) as f64 / nb;
        let members: Vec<usize> = (0..conf.len())
            .filter(|&i| (conf[i] > lo && conf[i] <= hi) || (b == 0 && conf[i] == 0.0))
            .collect();
        if members.is_empty() {
            continue;
        }
        let m = members.len() as f64;
        let acc = members.iter().filter(|&&i| correct[i]).count() as f64 / m;
        let avg = members.iter().map(|&i| conf[i]).sum::<f64>() / m;
        ece += m / n * (acc - avg).abs();
    }
    ece
}
