//! Command-line interface.
//!
//! ```text
//! lbd [--config PATH] [--seed N] [--out DIR] [--jobs N] [overrides] <COMMAND>
//!
//!   generate-data           write train.csv / test.csv from the synthetic generator
//!   train                   train, checkpoint and evaluate
//!   evaluate --checkpoint   evaluate a saved ensemble
//!   sweep <AXIS> [--values a,b,...]
//! ```
//!
//! Any config key can be set with `--set key=value`; the common ones also
//! have dedicated flags. Flags win over the config file.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::experiment;
use crate::sweep::Axis;

#[derive(Debug, Parser)]
#[command(
    name = "lbd",
    version,
    about = "Long-tailed Bayesian decision experiments"
)]
pub struct Cli {
    #[command(flatten)]
    pub overrides: Overrides,
    /// Parallel sweep cells; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    /// Log level filter (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "info")]
    pub log: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the synthetic long-tailed task as train.csv and test.csv.
    GenerateData,
    /// Train an ensemble, save it and evaluate it on the test set.
    Train,
    /// Evaluate a saved ensemble on the configured test set.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Run an ablation grid with repeated seeds per cell.
    Sweep {
        axis: Axis,
        /// Comma-separated grid values; defaults to the full axis.
        #[arg(long)]
        values: Option<String>,
    },
}

#[derive(Debug, Default, Args)]
pub struct Overrides {
    /// TOML experiment config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub train_data: Option<PathBuf>,
    #[arg(long, global = true)]
    pub test_data: Option<PathBuf>,
    /// one-hot, tail-sensitive or file.
    #[arg(long, global = true)]
    pub utility: Option<String>,
    #[arg(long, global = true)]
    pub utility_file: Option<PathBuf>,
    #[arg(long, global = true)]
    pub rho: Option<f64>,
    #[arg(long, global = true)]
    pub tail_ratio: Option<f64>,
    /// linear, power, effective, sqrt, log or plain.
    #[arg(long, global = true)]
    pub ratio: Option<String>,
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    #[arg(long, global = true)]
    pub particles: Option<usize>,
    #[arg(long, global = true)]
    pub repulsion: Option<f64>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub runs: Option<usize>,
    /// Any other config key, as `key=value` in TOML syntax.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

impl Overrides {
    fn pairs(&self) -> Result<Vec<(String, toml::Value)>> {
        use toml::Value as V;
        let path = |p: &PathBuf| V::String(p.display().to_string());
        let float = |x: f64| V::Float(x);
        let int = |n: usize| V::Integer(n as i64);
        let mut out: Vec<(String, toml::Value)> = Vec::new();
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects key=value, got '{kv}'")))?;
            out.push((k.trim().to_string(), parse_value(v.trim())));
        }
        let flags: [(&str, Option<V>); 16] = [
            ("seed", self.seed.map(|s| V::Integer(s as i64))),
            ("out", self.out.as_ref().map(path)),
            ("train_data", self.train_data.as_ref().map(path)),
            ("test_data", self.test_data.as_ref().map(path)),
            ("utility", self.utility.clone().map(V::String)),
            ("utility_file", self.utility_file.as_ref().map(path)),
            ("rho", self.rho.map(float)),
            ("tail_ratio", self.tail_ratio.map(float)),
            ("ratio", self.ratio.clone().map(V::String)),
            ("gamma", self.gamma.map(float)),
            ("beta", self.beta.map(float)),
            ("epochs", self.epochs.map(int)),
            ("particles", self.particles.map(int)),
            ("repulsion", self.repulsion.map(float)),
            ("alpha", self.alpha.map(float)),
            ("runs", self.runs.map(int)),
        ];
        out.extend(
            flags
                .into_iter()
                .filter_map(|(k, v)| v.map(|v| (k.to_string(), v))),
        );
        Ok(out)
    }

    /// Config file, then `--set` pairs, then dedicated flags.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut table = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                text.parse::<toml::Table>()
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for (k, v) in self.pairs()? {
            table.insert(k, v);
        }
        let cfg: ExperimentConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = cli.overrides.resolve()?;
    match &cli.command {
        Command::GenerateData => {
            let (tr, te) = experiment::generate(&cfg)?;
            println!("{}\n{}", tr.display(), te.display());
        }
        Command::Train => {
            let outcome = experiment::train(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&outcome.report)?);
        }
        Command::Evaluate { checkpoint } => {
            let report = experiment::evaluate(&cfg, checkpoint)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Sweep { axis, values } => {
            let values: Option<Vec<String>> = values.as_ref().map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect()
            });
            let (_, table) = experiment::sweep(&cfg, *axis, values.as_deref(), cli.jobs)?;
            print!("{}", table.render());
        }
    }
    Ok(())
}

/// Parses arguments, runs the command and maps the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let _ = env_logger::Builder::new()
        .parse_filters(&cli.log)
        .format_timestamp(None)
        .try_init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
