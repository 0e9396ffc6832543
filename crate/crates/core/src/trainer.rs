//! Training loop, evaluation and repeated runs.
//!
//! Every epoch shuffles the training set with a stream keyed by
//! `(seed, epoch)`, walks it in minibatches and applies SGD with momentum to
//! every particle. The repulsive entropy term is weighted by
//! `repulsion * exp(-epoch / tau)`.
//!
//! Each particle steps along the gradient of its own data loss plus `M`
//! times the regularizer gradient, i.e. `M` times the gradient of the
//! ensemble loss. This removes the `1/M` mixture weight from the step size,
//! so a particle moves exactly as it would in a solo run when the
//! regularizer is switched off.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::{LongTailDataset, RegionPartition, TailSplit};
use crate::decision;
use crate::ensemble::{self, DiversityDiagnostics, ParticleEnsemble};
use crate::error::{check_dim, Error, Result};
use crate::metrics::{self, FhrEntry, MetricsReport};
use crate::net::NetShape;
use crate::objective::{self, LossBreakdown, ObjectiveConfig};
use crate::rebalance::{self, DiscrepancySpec};
use crate::rng;
use crate::utility::UtilityMatrix;

/// Multiply the learning rate by `factor` every `every` epochs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDecay {
    pub every: usize,
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// L2 coefficient.
    pub lambda: f64,
    /// Annealing stride of the repulsive term.
    pub tau: f64,
    /// Utility-term rescaling.
    pub alpha: f64,
    /// Number of particles `M`.
    pub particles: usize,
    /// Variance floor in the entropy estimate.
    pub epsilon: f64,
    /// Strength of the repulsive term before annealing, in `[0, 1]`;
    /// 0 switches repulsion off.
    pub repulsion: f64,
    pub seed: u64,
    pub ratio: DiscrepancySpec,
    pub hidden_dims: Vec<usize>,
    pub lr_decay: Option<StepDecay>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 40,
            batch_size: 64,
            learning_rate: 0.05,
            momentum: 0.9,
            lambda: 5e-4,
            tau: 40.0,
            alpha: 1.0,
            particles: 3,
            epsilon: ensemble::DEFAULT_EPSILON,
            repulsion: 1e-3,
            seed: 0,
            ratio: DiscrepancySpec::Linear,
            hidden_dims: vec![32],
            lr_decay: None,
        }
    }
}

fn require(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Input(msg()))
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        require(self.batch_size >= 1, || "batch_size must be >= 1".into())?;
        require(
            self.learning_rate >= 0.0 && self.learning_rate.is_finite(),
            || {
                format!(
                    "learning_rate must be finite and >= 0, got {}",
                    self.learning_rate
                )
            },
        )?;
        require((0.0..1.0).contains(&self.momentum), || {
            format!("momentum must lie in [0, 1), got {}", self.momentum)
        })?;
        require(self.lambda >= 0.0 && self.lambda.is_finite(), || {
            format!("lambda must be finite and >= 0, got {}", self.lambda)
        })?;
        require(self.tau > 0.0, || {
            format!("tau must be positive, got {}", self.tau)
        })?;
        require(self.alpha > 0.0 && self.alpha.is_finite(), || {
            format!("alpha must be positive, got {}", self.alpha)
        })?;
        require(self.particles >= 1, || "need at least one particle".into())?;
        require(self.epsilon > 0.0 && self.epsilon.is_finite(), || {
            format!("epsilon must be positive, got {}", self.epsilon)
        })?;
        require((0.0..=1.0).contains(&self.repulsion), || {
            format!("repulsion must lie in [0, 1], got {}", self.repulsion)
        })?;
        require(self.hidden_dims.iter().all(|&h| h > 0), || {
            "hidden layer widths must be positive".into()
        })?;
        if let Some(d) = self.lr_decay {
            require(
                d.every >= 1 && d.factor > 0.0 && d.factor.is_finite(),
                || "lr_decay needs every >= 1 and factor > 0".into(),
            )?;
        }
        self.ratio.validate()
    }

    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        match self.lr_decay {
            Some(d) => self.learning_rate * libm::pow(d.factor, (epoch / d.every) as f64),
            None => self.learning_rate,
        }
    }

    /// Entropy weight used in `epoch`.
    pub fn anneal_at(&self, epoch: usize) -> f64 {
        if self.particles < 2 {
            0.0
        } else {
            self.repulsion * anneal_weight(epoch, self.tau)
        }
    }
}

/// `exp(-epoch / tau)`
pub fn anneal_weight(epoch: usize, tau: f64) -> f64 {
    libm::exp(-(epoch as f64) / tau)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean over the epoch's minibatches.
    pub loss: LossBreakdown,
    /// Entropy weight applied during the epoch.
    pub anneal: f64,
    pub learning_rate: f64,
    /// Measured on the training set after the epoch.
    pub diversity: DiversityDiagnostics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation: Option<MetricsReport>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
}

/// Network shape implied by a config and a dataset.
pub fn shape_for(config: &TrainConfig, data: &LongTailDataset) -> Result<NetShape> {
    NetShape::new(data.dim(), config.hidden_dims.clone(), data.num_classes())
}

/// Per-epoch callback; an error aborts training.
pub type EpochCallback<'a> = &'a mut dyn FnMut(&EpochRecord, &ParticleEnsemble) -> Result<()>;

/// Optional extras for [`train_with`].
#[derive(Default)]
pub struct TrainHooks<'a> {
    /// Evaluated after every epoch and stored in the log.
    pub validation: Option<(&'a LongTailDataset, &'a EvalConfig)>,
    pub on_epoch: Option<EpochCallback<'a>>,
}

/// Trains from seeded random particles.
pub fn train(
    config: &TrainConfig,
    data: &LongTailDataset,
    utility: &UtilityMatrix,
) -> Result<(ParticleEnsemble, TrainLog)> {
    config.validate()?;
    let shape = shape_for(config, data)?;
    let init = ParticleEnsemble::random(shape, config.particles, config.seed)?;
    train_with(config, init, data, utility, TrainHooks::default())
}

/// Trains starting from `init`. `config.particles` and `config.hidden_dims`
/// are ignored in favour of the ensemble's own.
pub fn train_with(
    config: &TrainConfig,
    init: ParticleEnsemble,
    data: &LongTailDataset,
    utility: &UtilityMatrix,
    mut hooks: TrainHooks<'_>,
) -> Result<(ParticleEnsemble, TrainLog)> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::input("training set is empty"));
    }
    let shape = init.shape().clone();
    check_dim("feature vector", shape.input_dim(), data.dim())?;
    check_dim("dataset classes", shape.num_classes(), data.num_classes())?;
    check_dim("utility matrix", shape.num_classes(), utility.num_classes())?;
    if let Some(k) = data.class_counts().iter().position(|&n| n == 0) {
        return Err(Error::input(format!(
            "class {k} has no training samples; every class must be represented"
        )));
    }
    let weights = rebalance::class_weights(&config.ratio, data.class_counts())?;
    let m = init.num_particles();
    if m == 1 && config.repulsion > 0.0 {
        log::warn!("repulsion has no effect with a single particle");
    }

    let mut ens = init;
    let mut velocity = vec![vec![0.0; shape.num_params()]; m];
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut log = TrainLog::default();

    for epoch in 0..config.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng::stream(
            config.seed,
            rng::TAG_SHUFFLE,
            epoch as u64,
        ));
        let lr = config.learning_rate_at(epoch);
        let obj = ObjectiveConfig {
            alpha: config.alpha,
            lambda: config.lambda,
            anneal: if m < 2 { 0.0 } else { config.anneal_at(epoch) },
            epsilon: config.epsilon,
        };
        let mut sum = LossBreakdown::default();
        let mut batches = 0usize;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let parts =
                objective::loss_parts(&ens, data, batch, &weights, utility, &obj).map_err(|e| {
                    match e {
                        Error::NonFinite { index } => Error::Diverged {
                            epoch,
                            batch: b,
                            index,
                        },
                        other => other,
                    }
                })?;
            accumulate(&mut sum, &parts.breakdown);
            batches += 1;
            let scale = m as f64;
            for (((particle, vel), g), r) in ens
                .particles_mut()
                .iter_mut()
                .zip(velocity.iter_mut())
                .zip(&parts.data_grads)
                .zip(&parts.reg_grads)
            {
                for (((theta, v), g), r) in particle
                    .as_mut_slice()
                    .iter_mut()
                    .zip(vel.iter_mut())
                    .zip(g.as_slice())
                    .zip(r.as_slice())
                {
                    *v = config.momentum * *v + (g + scale * r);
                    *theta -= lr * *v;
                }
            }
            if let Some(i) = ens
                .particles()
                .iter()
                .position(|p| p.as_slice().iter().any(|v| !v.is_finite()))
            {
                log::error!("particle {i} left the finite range at epoch {epoch}");
                return Err(Error::Diverged {
                    epoch,
                    batch: b,
                    index: batch[0],
                });
            }
        }
        let inv = 1.0 / batches as f64;
        let loss = LossBreakdown {
            nll_term: sum.nll_term * inv,
            utility_term: sum.utility_term * inv,
            reg_l2: sum.reg_l2 * inv,
            reg_entropy: sum.reg_entropy * inv,
            total: sum.total * inv,
        };
        let diversity = ensemble::diversity_diagnostics(&ens, data)?;
        let validation = match hooks.validation {
            Some((test, eval)) => Some(evaluate(&ens, test, utility, eval)?),
            None => None,
        };
        let record = EpochRecord {
            epoch,
            loss,
            anneal: obj.anneal,
            learning_rate: lr,
            diversity,
            validation,
        };
        log::debug!(
            "epoch {epoch}: loss {:.5} (nll {:.5}, utility {:.5}), disagreement {:.4}",
            loss.total,
            loss.nll_term,
            loss.utility_term,
            diversity.mean_disagreement
        );
        if let Some(cb) = hooks.on_epoch.as_mut() {
            cb(&record, &ens)?;
        }
        log.records.push(record);
    }
    Ok((ens, log))
}

fn accumulate(sum: &mut LossBreakdown, b: &LossBreakdown) {
    sum.nll_term += b.nll_term;
    sum.utility_term += b.utility_term;
    sum.reg_l2 += b.reg_l2;
    sum.reg_entropy += b.reg_entropy;
    sum.total += b.total;
}

/// Evaluation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub tail_ratios: Vec<f64>,
    pub ece_bins: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            tail_ratios: metrics::DEFAULT_TAIL_RATIOS.to_vec(),
            ece_bins: metrics::DEFAULT_ECE_BINS,
        }
    }
}

/// Decides every test sample under `utility` and computes every metric.
pub fn evaluate(
    ens: &ParticleEnsemble,
    test: &LongTailDataset,
    utility: &UtilityMatrix,
    eval: &EvalConfig,
) -> Result<MetricsReport> {
    let outputs = decision::decide_batch(ens, utility, test)?;
    evaluate_decisions(ens, test, &outputs, eval)
}

/// Metrics from decisions already made by [`decision::decide_batch`].
pub fn evaluate_decisions(
    ens: &ParticleEnsemble,
    test: &LongTailDataset,
    outputs: &[decision::DecisionOutput],
    eval: &EvalConfig,
) -> Result<MetricsReport> {
    check_dim("decisions", test.len(), outputs.len())?;
    if test.is_empty() {
        return Err(Error::input("test set is empty"));
    }
    if eval.tail_ratios.is_empty() {
        return Err(Error::input("at least one tail ratio is required"));
    }
    let k = test.num_classes();
    let labels = test.labels();
    let decisions: Vec<usize> = outputs.iter().map(|o| o.decision).collect();
    let correct: Vec<bool> = decisions.iter().zip(labels).map(|(d, y)| d == y).collect();

    let regions = if k >= 3 {
        metrics::region_accuracy(&decisions, labels, &RegionPartition::new(k)?)?
    } else {
        log::warn!("region accuracies need at least 3 classes; reporting 0");
        metrics::RegionAccuracy {
            overall: correct.iter().filter(|&&c| c).count() as f64 / test.len() as f64,
            ..Default::default()
        }
    };

    let mut fhr = Vec::with_capacity(eval.tail_ratios.len());
    for &r in &eval.tail_ratios {
        let split = TailSplit::new(k, r)?;
        fhr.push(FhrEntry {
            tail_ratio: r,
            fhr: metrics::false_head_rate(&decisions, labels, &split)?,
        });
    }
    let fhr_avg = fhr.iter().map(|e| e.fhr).sum::<f64>() / fhr.len() as f64;

    let uncertainty: Vec<f64> = outputs
        .iter()
        .map(|o| metrics::predictive_entropy(&o.mixture))
        .collect();
    let auc = metrics::auc_misclassification(&uncertainty, &correct)?;
    let confidence: Vec<f64> = outputs
        .iter()
        .map(|o| o.confidence().clamp(0.0, 1.0))
        .collect();
    let ece = metrics::expected_calibration_error(&confidence, &correct, eval.ece_bins)?;
    let mixture_hits = outputs
        .iter()
        .zip(labels)
        .filter(|(o, &y)| o.argmax_pred == y)
        .count();
    let diversity = ensemble::diversity_diagnostics(ens, test)?;

    Ok(MetricsReport {
        n_test: test.len(),
        acc_overall: regions.overall,
        acc_head: regions.head,
        acc_med: regions.med,
        acc_tail: regions.tail,
        fhr,
        fhr_avg,
        auc,
        ece,
        acc_mixture_argmax: mixture_hits as f64 / test.len() as f64,
        mean_param_distance: diversity.mean_param_distance,
        mean_disagreement: diversity.mean_disagreement,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation over runs.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self {
                mean: 0.0,
                std: 0.0,
            };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Self {
            mean,
            std: libm::sqrt(var),
        }
    }
}

/// Results of training the same configuration under consecutive seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seeds: Vec<u64>,
    pub reports: Vec<MetricsReport>,
}

impl RunSummary {
    /// Mean and standard deviation of any scalar extracted from the reports.
    /// Runs where `metric` is `None` are skipped.
    pub fn stat(&self, metric: impl Fn(&MetricsReport) -> Option<f64>) -> MeanStd {
        let values: Vec<f64> = self.reports.iter().filter_map(metric).collect();
        MeanStd::of(&values)
    }

    pub fn acc_overall(&self) -> MeanStd {
        self.stat(|r| Some(r.acc_overall))
    }
}

/// Trains and evaluates `n_runs` times with seeds `seed, seed + 1, ...` on
/// fixed data.
pub fn repeat_runs(
    config: &TrainConfig,
    n_runs: usize,
    train_data: &LongTailDataset,
    test_data: &LongTailDataset,
    utility: &UtilityMatrix,
    eval: &EvalConfig,
) -> Result<RunSummary> {
    if n_runs == 0 {
        return Err(Error::input("n_runs must be positive"));
    }
    let mut seeds = Vec::with_capacity(n_runs);
    let mut reports = Vec::with_capacity(n_runs);
    for r in 0..n_runs {
        let cfg = TrainConfig {
            seed: config.seed.wrapping_add(r as u64),
            ..config.clone()
        };
        let (ens, _) = train(&cfg, train_data, utility)?;
        reports.push(evaluate(&ens, test_data, utility, eval)?);
        seeds.push(cfg.seed);
    }
    Ok(RunSummary { seeds, reports })
}
