//! Versioned text checkpoints of a particle ensemble.
//!
//! ```text
//! lbd-ensemble 1
//! input_dim 16
//! hidden 32
//! classes 10
//! particles 3
//! mixture 0.3333333333333333 0.3333333333333333 0.3333333333333333
//! particle 0
//! <one parameter per line>
//! particle 1
//! ...
//! ```
//!
//! `hidden` lists the layer widths separated by spaces and may be empty.
//! Values use shortest round-trip formatting, so a saved ensemble loads back
//! bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use lbd_core::ensemble::ParticleEnsemble;
use lbd_core::net::{NetShape, ParamVector};

use crate::error::{Error, Result};

const MAGIC: &str = "lbd-ensemble";
const VERSION: u32 = 1;

pub fn to_text(ens: &ParticleEnsemble) -> String {
    let shape = ens.shape();
    let mut s = String::new();
    let join = |v: &mut dyn Iterator<Item = String>| v.collect::<Vec<_>>().join(" ");
    writeln!(s, "{MAGIC} {VERSION}").unwrap();
    writeln!(s, "input_dim {}", shape.input_dim()).unwrap();
    let hidden = join(&mut shape.hidden_dims().iter().map(|h| h.to_string()));
    writeln!(s, "hidden {hidden}").unwrap();
    writeln!(s, "classes {}", shape.num_classes()).unwrap();
    writeln!(s, "particles {}", ens.num_particles()).unwrap();
    let mixture = join(&mut ens.mixture_weights().iter().map(|w| w.to_string()));
    writeln!(s, "mixture {mixture}").unwrap();
    for (j, p) in ens.particles().iter().enumerate() {
        writeln!(s, "particle {j}").unwrap();
        for v in p.as_slice() {
            writeln!(s, "{v}").unwrap();
        }
    }
    s
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    path: &'a Path,
}

impl<'a> Lines<'a> {
    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Checkpoint {
            path: self.path.to_path_buf(),
            message: format!("line {line}: {}", message.into()),
        }
    }

    fn next(&mut self) -> Result<(usize, &'a str)> {
        match self.inner.next() {
            Some((i, l)) => Ok((i + 1, l.trim_end())),
            None => Err(Error::Checkpoint {
                path: self.path.to_path_buf(),
                message: "unexpected end of file".into(),
            }),
        }
    }

    /// Reads `key value...` and returns the remainder after the key.
    fn field(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (n, line) = self.next()?;
        match line.split_once(' ') {
            Some((k, rest)) if k == key => Ok((n, rest)),
            None if line == key => Ok((n, "")),
            _ => Err(self.err(n, format!("expected '{key}'"))),
        }
    }

    fn usize_field(&mut self, key: &str) -> Result<usize> {
        let (n, v) = self.field(key)?;
        v.parse()
            .map_err(|_| self.err(n, format!("{key}: '{v}' is not a count")))
    }
}

pub fn from_text(text: &str, path: &Path) -> Result<ParticleEnsemble> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        path,
    };
    let (n, version) = lines.field(MAGIC)?;
    if version != VERSION.to_string() {
        return Err(lines.err(n, format!("unsupported version '{version}'")));
    }
    let input_dim = lines.usize_field("input_dim")?;
    let (n, hidden_raw) = lines.field("hidden")?;
    let hidden = hidden_raw
        .split_whitespace()
        .map(|h| h.parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| lines.err(n, "hidden widths must be counts"))?;
    let classes = lines.usize_field("classes")?;
    let m = lines.usize_field("particles")?;
    let (n, mixture_raw) = lines.field("mixture")?;
    let mixture = mixture_raw
        .split_whitespace()
        .map(|w| w.parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| lines.err(n, "mixture weights must be numbers"))?;
    let shape = NetShape::new(input_dim, hidden, classes)?;
    let p = shape.num_params();
    let mut particles = Vec::with_capacity(m);
    for j in 0..m {
        let (n, idx) = lines.field("particle")?;
        if idx != j.to_string() {
            return Err(lines.err(n, format!("expected particle {j}, found '{idx}'")));
        }
        let mut values = Vec::with_capacity(p);
        for _ in 0..p {
            let (n, v) = lines.next()?;
            values.push(
                v.parse::<f64>()
                    .map_err(|_| lines.err(n, format!("'{v}' is not a number")))?,
            );
        }
        particles.push(ParamVector::from_vec(&shape, values)?);
    }
    if let Ok((n, extra)) = lines.next() {
        if !extra.is_empty() {
            return Err(lines.err(n, "trailing data"));
        }
    }
    Ok(ParticleEnsemble::with_weights(shape, particles, mixture)?)
}

pub fn save(path: &Path, ens: &ParticleEnsemble) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, to_text(ens)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<ParticleEnsemble> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_text(&text, path)
}
