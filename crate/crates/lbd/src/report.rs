//! Machine-readable outputs: JSON reports, JSONL training logs and CSV
//! result tables.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use lbd_core::trainer::{MeanStd, RunSummary, TrainLog};

use crate::error::{Error, Result};

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

/// One epoch record per line.
pub fn write_train_log(path: &Path, log: &TrainLog) -> Result<()> {
    let mut buf = Vec::new();
    for record in &log.records {
        serde_json::to_writer(&mut buf, record)?;
        buf.push(b'\n');
    }
    write_file(path, &buf)
}

/// `mean±std` of a fraction, printed in percent with two decimals.
pub fn pct(stat: MeanStd) -> String {
    format!("{:.2}±{:.2}", 100.0 * stat.mean, 100.0 * stat.std)
}

/// A small string table written as CSV.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<S: Into<String>>(&mut self, row: impl IntoIterator<Item = S>) {
        let row: Vec<String> = row.into_iter().map(Into::into).collect();
        assert_eq!(
            row.len(),
            self.header.len(),
            "row width must match the header"
        );
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_file(path, self.to_csv().as_bytes())
    }

    /// Column-aligned rendering for terminals.
    pub fn render(&self) -> String {
        let widths: Vec<usize> = (0..self.header.len())
            .map(|c| {
                std::iter::once(&self.header)
                    .chain(&self.rows)
                    .map(|r| r[c].chars().count())
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = Vec::new();
        for row in std::iter::once(&self.header).chain(&self.rows) {
            let cells: Vec<String> = row
                .iter()
                .zip(&widths)
                .map(|(cell, w)| format!("{cell:<w$}"))
                .collect();
            writeln!(out, "{}", cells.join("  ").trim_end()).unwrap();
        }
        String::from_utf8(out).unwrap()
    }
}

/// Overall / head / medium / tail accuracy row.
pub fn accuracy_table(label: &str, summary: &RunSummary) -> Table {
    let mut t = Table::new(["method", "overall", "head", "med", "tail"]);
    t.push([
        label.to_string(),
        pct(summary.acc_overall()),
        pct(summary.stat(|r| Some(r.acc_head))),
        pct(summary.stat(|r| Some(r.acc_med))),
        pct(summary.stat(|r| Some(r.acc_tail))),
    ]);
    t
}
