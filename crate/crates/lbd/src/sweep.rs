//! Ablation grids.
//!
//! A sweep varies one axis of an [`ExperimentConfig`], runs
//! [`repeat_runs`] for every value and condenses the results into a table:
//!
//! | axis        | values                                   | columns                                             |
//! |-------------|------------------------------------------|-----------------------------------------------------|
//! | `utility`   | one-hot, tail-sensitive                  | accuracies per region, FHR per tail ratio, mean FHR |
//! | `ratio`     | linear, effective, sqrt, log, plain      | first/last class weight, growth %, accuracy         |
//! | `repulsion` | on, off                                  | AUC, ECE, accuracy                                  |
//! | `particles` | 1..=8                                    | accuracy, disagreement                              |
//!
//! Cells are independent and run on a rayon pool; results are collected in
//! grid order, so the table does not depend on scheduling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use lbd_core::dataset::LongTailDataset;
use lbd_core::rebalance;
use lbd_core::trainer::{repeat_runs, RunSummary};

use crate::config::{ExperimentConfig, UtilityKind};
use crate::error::{Error, Result};
use crate::report::{pct, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Utility,
    Ratio,
    Repulsion,
    Particles,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Utility => "utility",
            Axis::Ratio => "ratio",
            Axis::Repulsion => "repulsion",
            Axis::Particles => "particles",
        }
    }

    pub fn default_values(self) -> Vec<String> {
        let v: &[&str] = match self {
            Axis::Utility => &["one-hot", "tail-sensitive"],
            Axis::Ratio => &["linear", "effective", "sqrt", "log", "plain"],
            Axis::Repulsion => &["on", "off"],
            Axis::Particles => &["1", "2", "3", "4", "5", "6", "7", "8"],
        };
        v.iter().map(|s| s.to_string()).collect()
    }

    /// Applies one grid value to a copy of `base`.
    pub fn apply(self, base: &ExperimentConfig, value: &str) -> Result<ExperimentConfig> {
        let mut cfg = base.clone();
        match self {
            Axis::Utility => match value.parse()? {
                UtilityKind::File => {
                    return Err(Error::Config(
                        "the utility sweep takes one-hot or tail-sensitive".into(),
                    ))
                }
                kind => cfg.utility = kind,
            },
            Axis::Ratio => cfg.ratio = value.to_string(),
            Axis::Repulsion => match value {
                "on" => {}
                "off" => cfg.repulsion = 0.0,
                other => {
                    return Err(Error::Config(format!(
                        "repulsion values are on/off, got '{other}'"
                    )))
                }
            },
            Axis::Particles => {
                let m: usize = value.parse().map_err(|_| {
                    Error::Config(format!("particle count '{value}' is not a count"))
                })?;
                if !(1..=8).contains(&m) {
                    return Err(Error::Config(format!(
                        "particle counts range over 1..=8, got {m}"
                    )));
                }
                cfg.particles = m;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One grid point and its repeated-run results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub value: String,
    pub summary: RunSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: Axis,
    pub cells: Vec<Cell>,
}

/// Builds and validates every cell config. Runs before any training.
pub fn plan(
    axis: Axis,
    base: &ExperimentConfig,
    values: Option<&[String]>,
) -> Result<Vec<(String, ExperimentConfig)>> {
    let values = match values {
        Some([]) => return Err(Error::Config(format!("the {} grid is empty", axis.name()))),
        Some(v) => v.to_vec(),
        None => axis.default_values(),
    };
    values
        .into_iter()
        .map(|v| axis.apply(base, &v).map(|c| (v, c)))
        .collect()
}

/// Runs the grid with at most `jobs` cells in flight (0 means one per core).
pub fn run(
    axis: Axis,
    base: &ExperimentConfig,
    values: Option<&[String]>,
    train: &LongTailDataset,
    test: &LongTailDataset,
    jobs: usize,
) -> Result<SweepResult> {
    let cells = plan(axis, base, values)?;
    let prepared = cells
        .into_iter()
        .map(|(value, cfg)| {
            let utility = cfg.utility_matrix(train.num_classes())?;
            Ok((
                value,
                cfg.train_config()?,
                utility,
                cfg.eval_config(),
                cfg.runs,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} workers: {e}")))?;
    let results: Vec<Result<Cell>> = pool.install(|| {
        prepared
            .par_iter()
            .map(|(value, tc, u, ec, runs)| {
                log::info!("sweep {}={value}: {runs} runs", axis.name());
                let summary = repeat_runs(tc, *runs, train, test, u, ec)?;
                Ok(Cell {
                    value: value.clone(),
                    summary,
                })
            })
            .collect()
    });
    Ok(SweepResult {
        axis,
        cells: results.into_iter().collect::<Result<_>>()?,
    })
}

impl SweepResult {
    /// The condensed table for this axis. `base` supplies the ratio
    /// parameters and `train` the class counts for the weight columns.
    pub fn table(&self, base: &ExperimentConfig, train: &LongTailDataset) -> Result<Table> {
        let acc = |c: &Cell| pct(c.summary.acc_overall());
        Ok(match self.axis {
            Axis::Utility => {
                let tail_ratios = &base.tail_ratios;
                let mut header = vec![
                    "utility".to_string(),
                    "overall".into(),
                    "head".into(),
                    "med".into(),
                    "tail".into(),
                ];
                header.extend(tail_ratios.iter().map(|r| format!("fhr@{}", r * 100.0)));
                header.push("fhr_avg".into());
                let mut t = Table::new(header);
                for c in &self.cells {
                    let s = &c.summary;
                    let mut row = vec![
                        c.value.clone(),
                        acc(c),
                        pct(s.stat(|r| Some(r.acc_head))),
                        pct(s.stat(|r| Some(r.acc_med))),
                        pct(s.stat(|r| Some(r.acc_tail))),
                    ];
                    row.extend(tail_ratios.iter().map(|&tr| pct(s.stat(|r| r.fhr_at(tr)))));
                    row.push(pct(s.stat(|r| Some(r.fhr_avg))));
                    t.push(row);
                }
                t
            }
            Axis::Ratio => {
                let mut t =
                    Table::new(["form", "first_weight", "last_weight", "growth_pct", "acc"]);
                for c in &self.cells {
                    let spec = ExperimentConfig {
                        ratio: c.value.clone(),
                        ..base.clone()
                    }
                    .ratio_spec()?;
                    let w = rebalance::class_weights(&spec, train.class_counts())?;
                    t.push([
                        c.value.clone(),
                        format!("{:.4e}", w.raw[0]),
                        format!("{:.4e}", w.raw[w.raw.len() - 1]),
                        format!("{:.0}", rebalance::growth_rate(&w)?),
                        acc(c),
                    ]);
                }
                t
            }
            Axis::Repulsion => {
                let mut t = Table::new(["repulsion", "auc", "ece", "acc"]);
                for c in &self.cells {
                    let s = &c.summary;
                    t.push([
                        c.value.clone(),
                        pct(s.stat(|r| r.auc)),
                        pct(s.stat(|r| Some(r.ece))),
                        acc(c),
                    ]);
                }
                t
            }
            Axis::Particles => {
                let mut t = Table::new(["particles", "acc", "disagreement"]);
                for c in &self.cells {
                    t.push([
                        c.value.clone(),
                        acc(c),
                        pct(c.summary.stat(|r| Some(r.mean_disagreement))),
                    ]);
                }
                t
            }
        })
    }
}
