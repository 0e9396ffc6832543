//! Long-tailed Bayesian decision making with particle ensembles.
//!
//! The crate trains an ensemble of small softmax classifiers ("particles")
//! on class-imbalanced data by maximizing a utility-weighted, re-balanced
//! likelihood bound with a repulsive entropy regularizer, then decides test
//! labels by maximizing the expected utility gain under the ensemble.
//!
//! Everything here is pure computation over in-memory values: no file IO,
//! no threads, no global state. The crate is `no_std` and needs only `alloc`;
//! the `lbd` companion crate adds file formats, checkpoints and the CLI.
//!
//! Module map:
//! - [`net`]: flat-parameter MLP with log-softmax output and exact backprop.
//! - [`dataset`]: synthetic long-tailed data, class counts, region and tail splits.
//! - [`rebalance`]: train/test discrepancy weights `1/f(n_y)`.
//! - [`utility`]: utility matrices (one-hot, tail-sensitive, custom).
//! - [`ensemble`]: particle ensemble, mixture predictive, repulsive regularizer.
//! - [`objective`]: minibatch training loss and its gradient.
//! - [`decision`]: expected-gain decision rule.
//! - [`metrics`]: accuracies, false head rate, entropy, AUC, ECE.
//! - [`trainer`]: SGD training loop, evaluation and repeated runs.
#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

pub mod dataset;
pub mod decision;
pub mod ensemble;
mod error;
pub mod metrics;
pub mod net;
pub mod objective;
pub mod rebalance;
pub(crate) mod rng;
pub mod trainer;
pub mod utility;

pub use error::{Error, Result};
