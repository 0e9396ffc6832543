//! The loss reduces to plain cross-entropy in its degenerate settings.

mod common;

use common::*;
use lbd_core::ensemble;
use lbd_core::net::forward_logprobs;
use lbd_core::net::NetShape;
use lbd_core::objective::{batch_loss, ObjectiveConfig};
use lbd_core::rebalance::{class_weights, DiscrepancySpec};
use lbd_core::utility::UtilityMatrix;
use rand::Rng;

fn mean_cross_entropy(
    ens: &ensemble::ParticleEnsemble,
    data: &lbd_core::dataset::LongTailDataset,
    batch: &[usize],
) -> f64 {
    let m = ens.num_particles() as f64;
    let total: f64 = batch
        .iter()
        .map(|&i| {
            ens.particles()
                .iter()
                .map(|p| {
                    -forward_logprobs(ens.shape(), p, data.features(i)).unwrap()[data.label(i)]
                })
                .sum::<f64>()
                / m
        })
        .sum();
    total / batch.len() as f64
}

#[test]
fn degenerate_settings_give_cross_entropy() {
    let mut rng = rng(20);
    for _ in 0..200 {
        let k = rng.random_range(2..6);
        let shape = NetShape::new(3, vec![rng.random_range(2..8)], k).unwrap();
        let m = rng.random_range(1..5);
        let ens = random_ensemble(&mut rng, &shape, m, 1.0);
        let data = random_dataset(&mut rng, 20, 3, k);
        let batch: Vec<usize> = (0..rng.random_range(1..20))
            .map(|_| rng.random_range(0..20))
            .collect();
        let counts: Vec<usize> = (0..k).map(|_| rng.random_range(1..1000)).collect();
        let plain = class_weights(&DiscrepancySpec::Plain, &counts).unwrap();
        let ce = mean_cross_entropy(&ens, &data, &batch);

        let off = ObjectiveConfig {
            alpha: rng.random_range(0.1..10.0),
            lambda: 0.0,
            anneal: 0.0,
            epsilon: ensemble::DEFAULT_EPSILON,
        };
        let zero = UtilityMatrix::zeros(k).unwrap();
        let loss = batch_loss(&ens, &data, &batch, &plain, &zero, &off)
            .unwrap()
            .0;
        assert!((loss.total - ce).abs() < 1e-12, "{} vs {ce}", loss.total);

        let alpha_one = ObjectiveConfig { alpha: 1.0, ..off };
        let one_hot = UtilityMatrix::one_hot(k).unwrap();
        let loss = batch_loss(&ens, &data, &batch, &plain, &one_hot, &alpha_one)
            .unwrap()
            .0;
        assert!(
            (loss.total - 2.0 * ce).abs() < 1e-12,
            "{} vs {}",
            loss.total,
            2.0 * ce
        );
        assert_eq!(loss.nll_term, loss.utility_term);
    }
}
