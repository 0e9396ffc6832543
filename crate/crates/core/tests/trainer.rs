//! Training loop against a hand-rolled momentum-SGD reference.

mod common;

use common::*;
use lbd_core::dataset::{generate_synthetic, SyntheticConfig};
use lbd_core::ensemble::ParticleEnsemble;
use lbd_core::net::NetShape;
use lbd_core::objective::{batch_loss, ObjectiveConfig};
use lbd_core::rebalance::{class_weights, DiscrepancySpec};
use lbd_core::trainer::{train, train_with, TrainConfig, TrainHooks};
use lbd_core::utility::UtilityMatrix;

fn small_task(
    seed: u64,
) -> (
    lbd_core::dataset::LongTailDataset,
    lbd_core::dataset::LongTailDataset,
) {
    generate_synthetic(&SyntheticConfig {
        num_classes: 4,
        n_max: 60,
        imbalance_factor: 10.0,
        dim: 3,
        test_per_class: 10,
        seed,
        ..SyntheticConfig::default()
    })
    .unwrap()
}

/// Full-batch momentum SGD where particle `j` steps along `M * d total / d theta_j`.
fn reference_trajectory(
    cfg: &TrainConfig,
    init: &ParticleEnsemble,
    data: &lbd_core::dataset::LongTailDataset,
    u: &UtilityMatrix,
) -> ParticleEnsemble {
    let weights = class_weights(&cfg.ratio, data.class_counts()).unwrap();
    let batch: Vec<usize> = (0..data.len()).collect();
    let m = init.num_particles();
    let mut ens = init.clone();
    let mut vel = vec![vec![0.0; init.shape().num_params()]; m];
    for epoch in 0..cfg.epochs {
        let obj = ObjectiveConfig {
            alpha: cfg.alpha,
            lambda: cfg.lambda,
            anneal: cfg.anneal_at(epoch),
            epsilon: cfg.epsilon,
        };
        let (_, grads) = batch_loss(&ens, data, &batch, &weights, u, &obj).unwrap();
        for ((p, v), g) in ens.particles_mut().iter_mut().zip(&mut vel).zip(&grads) {
            for ((t, v), g) in p
                .as_mut_slice()
                .iter_mut()
                .zip(v.iter_mut())
                .zip(g.as_slice())
            {
                *v = cfg.momentum * *v + m as f64 * g;
                *t -= cfg.learning_rate * *v;
            }
        }
    }
    ens
}

#[test]
fn matches_reference_trajectory() {
    let (data, _) = small_task(1);
    let u = UtilityMatrix::one_hot(4).unwrap();
    for (m, repulsion) in [(1, 0.0), (2, 0.0), (3, 0.5)] {
        let cfg = TrainConfig {
            epochs: 15,
            batch_size: data.len(),
            particles: m,
            repulsion,
            tau: 5.0,
            lambda: 1e-3,
            hidden_dims: vec![5],
            ratio: DiscrepancySpec::Sqrt,
            ..TrainConfig::default()
        };
        let shape = NetShape::new(3, vec![5], 4).unwrap();
        let init = ParticleEnsemble::random(shape, m, 7).unwrap();
        let (trained, _) =
            train_with(&cfg, init.clone(), &data, &u, TrainHooks::default()).unwrap();
        let expected = reference_trajectory(&cfg, &init, &data, &u);
        let e = rel_err(&flatten(&trained), &flatten(&expected));
        assert!(e < 1e-10, "M={m}: relative difference {e}");
    }
}

#[test]
fn zero_learning_rate_keeps_particles() {
    let (data, _) = small_task(2);
    let u = UtilityMatrix::one_hot(4).unwrap();
    let cfg = TrainConfig {
        epochs: 3,
        learning_rate: 0.0,
        batch_size: 16,
        hidden_dims: vec![4],
        ..TrainConfig::default()
    };
    let init = ParticleEnsemble::random(NetShape::new(3, vec![4], 4).unwrap(), 3, 0).unwrap();
    let (trained, log) = train_with(&cfg, init.clone(), &data, &u, TrainHooks::default()).unwrap();
    assert_eq!(trained, init);
    assert_eq!(log.records.len(), 3);
}

#[test]
fn loss_decreases() {
    let mut decreased = 0;
    for seed in 0..5 {
        let (data, _) = small_task(seed);
        let u = UtilityMatrix::one_hot(4).unwrap();
        let cfg = TrainConfig {
            epochs: 20,
            batch_size: 32,
            hidden_dims: vec![8],
            seed,
            ..TrainConfig::default()
        };
        let (_, log) = train(&cfg, &data, &u).unwrap();
        let first = log.records.first().unwrap().loss.total;
        let last = log.records.last().unwrap().loss.total;
        decreased += usize::from(last < first);
    }
    assert!(decreased >= 4, "loss decreased in {decreased}/5 seeds");
}

#[test]
fn unregularized_particles_train_independently() {
    let (data, _) = small_task(3);
    let u = UtilityMatrix::one_hot(4).unwrap();
    let cfg = TrainConfig {
        epochs: 6,
        batch_size: 20,
        lambda: 0.0,
        repulsion: 0.0,
        hidden_dims: vec![6],
        seed: 11,
        ..TrainConfig::default()
    };
    let shape = NetShape::new(3, vec![6], 4).unwrap();
    let init = ParticleEnsemble::random(shape.clone(), 3, 5).unwrap();
    let (joint, _) = train_with(&cfg, init.clone(), &data, &u, TrainHooks::default()).unwrap();
    for (j, p) in init.particles().iter().enumerate() {
        let solo = ParticleEnsemble::new(shape.clone(), vec![p.clone()]).unwrap();
        let (solo, _) = train_with(&cfg, solo, &data, &u, TrainHooks::default()).unwrap();
        assert_eq!(solo.particles()[0], joint.particles()[j], "particle {j}");
    }
}

#[test]
fn training_is_deterministic() {
    let (data, test) = small_task(4);
    let u = UtilityMatrix::one_hot(4).unwrap();
    let cfg = TrainConfig {
        epochs: 4,
        batch_size: 16,
        hidden_dims: vec![6],
        seed: 3,
        ..TrainConfig::default()
    };
    let eval = lbd_core::trainer::EvalConfig::default();
    let run = || {
        let init =
            ParticleEnsemble::random(NetShape::new(3, vec![6], 4).unwrap(), 3, cfg.seed).unwrap();
        let hooks = TrainHooks {
            validation: Some((&test, &eval)),
            on_epoch: None,
        };
        train_with(&cfg, init, &data, &u, hooks).unwrap()
    };
    let (a, log_a) = run();
    let (b, log_b) = run();
    assert_eq!(a, b);
    assert_eq!(log_a, log_b);
    assert!(log_a.records.iter().all(|r| r.validation.is_some()));
    let (c, _) = train(
        &TrainConfig {
            seed: 4,
            ..cfg.clone()
        },
        &data,
        &u,
    )
    .unwrap();
    assert_ne!(a, c);
}
