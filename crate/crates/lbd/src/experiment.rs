//! The four commands as plain functions over a validated config.
//!
//! Every command writes into `config.out` and echoes the effective config
//! there as `config.toml`.

use std::path::{Path, PathBuf};

use lbd_core::dataset::{generate_synthetic, LongTailDataset, Split};
use lbd_core::decision;
use lbd_core::ensemble::ParticleEnsemble;
use lbd_core::metrics::MetricsReport;
use lbd_core::trainer::{self, RunSummary, TrainLog};

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::sweep::{self, Axis, SweepResult};
use crate::{checkpoint, csvio, report};

pub const CONFIG_FILE: &str = "config.toml";
pub const TRAIN_FILE: &str = "train.csv";
pub const TEST_FILE: &str = "test.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.txt";
pub const TRAIN_LOG_FILE: &str = "train_log.jsonl";
pub const METRICS_FILE: &str = "metrics.json";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

fn echo_config(cfg: &ExperimentConfig) -> Result<()> {
    let path = cfg.out.join(CONFIG_FILE);
    std::fs::create_dir_all(&cfg.out).map_err(|e| crate::Error::io(&cfg.out, e))?;
    std::fs::write(&path, cfg.to_toml()).map_err(|e| crate::Error::io(&path, e))
}

fn with_classes(data: LongTailDataset, k: usize) -> Result<LongTailDataset> {
    if data.num_classes() == k {
        return Ok(data);
    }
    Ok(LongTailDataset::new(
        data.dim(),
        k,
        data.feature_matrix().to_vec(),
        data.labels().to_vec(),
        data.split(),
    )?)
}

/// Reads the configured CSV pair or generates the synthetic task. Both sets
/// share the class count of whichever has the larger label range.
pub fn load_data(cfg: &ExperimentConfig) -> Result<(LongTailDataset, LongTailDataset)> {
    match (&cfg.train_data, &cfg.test_data) {
        (Some(tr), Some(te)) => {
            let train = csvio::load_dataset(tr, Split::Train)?;
            let test = csvio::load_dataset(te, Split::Test)?;
            if train.dim() != test.dim() {
                return Err(lbd_core::Error::Dimension {
                    what: "test features",
                    expected: train.dim(),
                    got: test.dim(),
                }
                .into());
            }
            let k = train.num_classes().max(test.num_classes());
            Ok((with_classes(train, k)?, with_classes(test, k)?))
        }
        _ => Ok(generate_synthetic(&cfg.synthetic_config())?),
    }
}

pub fn generate(cfg: &ExperimentConfig) -> Result<(PathBuf, PathBuf)> {
    cfg.validate()?;
    let (train, test) = generate_synthetic(&cfg.synthetic_config())?;
    let (tr, te) = (cfg.out.join(TRAIN_FILE), cfg.out.join(TEST_FILE));
    csvio::save_dataset(&tr, &train)?;
    csvio::save_dataset(&te, &test)?;
    echo_config(cfg)?;
    log::info!(
        "wrote {} training and {} test samples",
        train.len(),
        test.len()
    );
    Ok((tr, te))
}

/// Outputs of [`train`].
pub struct TrainOutcome {
    pub ensemble: ParticleEnsemble,
    pub log: TrainLog,
    pub report: MetricsReport,
}

fn write_evaluation(
    cfg: &ExperimentConfig,
    ens: &ParticleEnsemble,
    test: &LongTailDataset,
) -> Result<MetricsReport> {
    let utility = cfg.utility_matrix(test.num_classes())?;
    let outputs = decision::decide_batch(ens, &utility, test)?;
    let report = trainer::evaluate_decisions(ens, test, &outputs, &cfg.eval_config())?;
    report::write_json(&cfg.out.join(METRICS_FILE), &report)?;
    csvio::save_predictions(&cfg.out.join(PREDICTIONS_FILE), &outputs)?;
    let summary = RunSummary {
        seeds: vec![cfg.seed],
        reports: vec![report.clone()],
    };
    report::accuracy_table("lbd", &summary).write(&cfg.out.join(SUMMARY_FILE))?;
    Ok(report)
}

/// Trains, saves the checkpoint and log, then evaluates on the test set.
pub fn train(cfg: &ExperimentConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let (train, test) = load_data(cfg)?;
    let utility = cfg.utility_matrix(train.num_classes())?;
    let tc = cfg.train_config()?;
    echo_config(cfg)?;
    let (ensemble, log) = trainer::train(&tc, &train, &utility)?;
    checkpoint::save(&cfg.out.join(CHECKPOINT_FILE), &ensemble)?;
    report::write_train_log(&cfg.out.join(TRAIN_LOG_FILE), &log)?;
    let report = write_evaluation(cfg, &ensemble, &test)?;
    log::info!(
        "accuracy {:.4}, mean FHR {:.4}, ECE {:.4}",
        report.acc_overall,
        report.fhr_avg,
        report.ece
    );
    Ok(TrainOutcome {
        ensemble,
        log,
        report,
    })
}

/// Evaluates a saved checkpoint on the configured test set.
pub fn evaluate(cfg: &ExperimentConfig, checkpoint_path: &Path) -> Result<MetricsReport> {
    cfg.validate()?;
    let ens = checkpoint::load(checkpoint_path)?;
    let (_, test) = load_data(cfg)?;
    echo_config(cfg)?;
    write_evaluation(cfg, &ens, &test)
}

pub fn sweep_file(axis: Axis, ext: &str) -> String {
    format!("sweep_{}.{ext}", axis.name())
}

/// Runs an ablation grid and writes the table and the raw summaries.
pub fn sweep(
    cfg: &ExperimentConfig,
    axis: Axis,
    values: Option<&[String]>,
    jobs: usize,
) -> Result<(SweepResult, report::Table)> {
    cfg.validate()?;
    sweep::plan(axis, cfg, values)?;
    let (train, test) = load_data(cfg)?;
    echo_config(cfg)?;
    let result = sweep::run(axis, cfg, values, &train, &test, jobs)?;
    let table = result.table(cfg, &train)?;
    table.write(&cfg.out.join(sweep_file(axis, "csv")))?;
    report::write_json(&cfg.out.join(sweep_file(axis, "json")), &result)?;
    Ok((result, table))
}
