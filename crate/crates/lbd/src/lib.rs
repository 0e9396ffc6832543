//! File formats, experiment configuration and the command-line driver
//! around [`lbd_core`].

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod csvio;
mod error;
pub mod experiment;
pub mod report;
pub mod sweep;

pub use error::{Error, Result};
pub use lbd_core;
