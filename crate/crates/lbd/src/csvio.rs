//! CSV formats: datasets, utility matrices and prediction exports.
//!
//! Dataset files have a header `f0,...,f{D-1},label` and one sample per
//! row; labels are non-negative base-10 integers and the class count is
//! `max label + 1`. Utility files are `K` rows of `K` numbers, no header.
//! Floats are written in shortest round-trip form, so save/load is exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use lbd_core::dataset::{LongTailDataset, Split};
use lbd_core::decision::DecisionOutput;
use lbd_core::metrics::predictive_entropy;
use lbd_core::utility::UtilityMatrix;

use crate::error::{Error, Result};

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    match err.into_kind() {
        csv::ErrorKind::Io(e) => Error::io(path, e),
        kind => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{kind:?}"),
        },
    }
}

pub fn load_dataset(path: &Path, split: Split) -> Result<LongTailDataset> {
    read_dataset(open(path)?, path, split)
}

/// Parses a dataset; `path` is only used in error messages.
pub fn read_dataset<R: Read>(reader: R, path: &Path, split: Split) -> Result<LongTailDataset> {
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.len() < 2 || &header[header.len() - 1] != "label" {
        return Err(parse_err(
            1,
            "header must list the feature columns followed by 'label'".into(),
        ));
    }
    let dim = header.len() - 1;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(csv_error(path, e)),
        }
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != dim + 1 {
            return Err(parse_err(
                line,
                format!("expected {} fields, found {}", dim + 1, record.len()),
            ));
        }
        for (j, field) in record.iter().take(dim).enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line, format!("feature {j}: '{field}' is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("feature {j} is not finite")));
            }
            features.push(v);
        }
        let raw = &record[dim];
        if raw.is_empty() {
            return Err(parse_err(line, "missing label".into()));
        }
        let label: i64 = raw
            .parse()
            .map_err(|_| parse_err(line, format!("label '{raw}' is not an integer")))?;
        if label < 0 {
            return Err(parse_err(line, format!("label {label} is negative")));
        }
        labels.push(label as usize);
    }
    if labels.is_empty() {
        return Err(parse_err(1, "no samples".into()));
    }
    let num_classes = labels.iter().max().map_or(0, |m| m + 1).max(2);
    Ok(LongTailDataset::new(
        dim,
        num_classes,
        features,
        labels,
        split,
    )?)
}

pub fn save_dataset(path: &Path, data: &LongTailDataset) -> Result<()> {
    let mut out = create(path)?;
    write_dataset(&mut out, data).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn write_dataset<W: Write>(out: &mut W, data: &LongTailDataset) -> std::io::Result<()> {
    let header: Vec<String> = (0..data.dim()).map(|j| format!("f{j}")).collect();
    writeln!(out, "{},label", header.join(","))?;
    for (x, y) in data.iter() {
        for v in x {
            write!(out, "{v},")?;
        }
        writeln!(out, "{y}")?;
    }
    Ok(())
}

pub fn load_utility(path: &Path) -> Result<UtilityMatrix> {
    read_utility(open(path)?, path)
}

pub fn read_utility<R: Read>(reader: R, path: &Path) -> Result<UtilityMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, f)| {
                f.parse::<f64>().map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    line: (i + 1) as u64,
                    message: format!("row {i}, column {j}: '{f}' is not a number"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(UtilityMatrix::from_rows(rows)?)
}

pub fn save_utility(path: &Path, utility: &UtilityMatrix) -> Result<()> {
    let mut out = create(path)?;
    let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
        for row in utility.rows() {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        out.flush()
    };
    write(&mut out).map_err(|e| Error::io(path, e))
}

/// `index,decision,argmax_pred,entropy,maxprob` per test sample.
pub fn save_predictions(path: &Path, outputs: &[DecisionOutput]) -> Result<()> {
    let mut out = create(path)?;
    let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(out, "index,decision,argmax_pred,entropy,maxprob")?;
        for (i, o) in outputs.iter().enumerate() {
            let maxprob = o.mixture.iter().copied().fold(0.0, f64::max);
            writeln!(
                out,
                "{i},{},{},{},{}",
                o.decision,
                o.argmax_pred,
                predictive_entropy(&o.mixture),
                maxprob
            )?;
        }
        out.flush()
    };
    write(&mut out).map_err(|e| Error::io(path, e))
}
