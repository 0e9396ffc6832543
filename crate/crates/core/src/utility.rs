//! Utility matrices `U[y][d] = u(true = y, decision = d)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::TailSplit;
use crate::error::{Error, Result};

/// Square matrix of decision gains. Every row has its maximum on the
/// diagonal, so deciding the true class is never worse than any other
/// decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityMatrix {
    num_classes: usize,
    /// Row-major, `values[y * K + d]`.
    values: Vec<f64>,
}

impl UtilityMatrix {
    /// Validates and wraps a list of rows.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let k = rows.len();
        if k < 2 {
            return Err(Error::input(format!(
                "utility matrix needs at least 2 rows, got {k}"
            )));
        }
        let mut values = Vec::with_capacity(k * k);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != k {
                return Err(Error::Utility {
                    row: i,
                    message: format!(
                        "has {} columns, expected {k} (matrix must be square)",
                        row.len()
                    ),
                });
            }
            values.extend(row);
        }
        Self::from_flat(k, values)
    }

    /// Validates a row-major `K x K` buffer.
    pub fn from_flat(num_classes: usize, values: Vec<f64>) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::input("utility matrix needs K >= 2"));
        }
        if values.len() != num_classes * num_classes {
            return Err(Error::Dimension {
                what: "utility matrix",
                expected: num_classes * num_classes,
                got: values.len(),
            });
        }
        for (i, row) in values.chunks_exact(num_classes).enumerate() {
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::Utility {
                    row: i,
                    message: format!("entry {j} is not finite"),
                });
            }
            if let Some(j) = row.iter().position(|&v| v > row[i]) {
                return Err(Error::Utility {
                    row: i,
                    message: format!(
                        "off-diagonal entry {j} ({}) exceeds the diagonal ({})",
                        row[j], row[i]
                    ),
                });
            }
        }
        Ok(Self {
            num_classes,
            values,
        })
    }

    /// Identity utility: gain 1 for a correct decision, 0 otherwise.
    pub fn one_hot(num_classes: usize) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::input("utility matrix needs K >= 2"));
        }
        let mut values = vec![0.0; num_classes * num_classes];
        for i in 0..num_classes {
            values[i * num_classes + i] = 1.0;
        }
        Ok(Self {
            num_classes,
            values,
        })
    }

    /// One-hot utility plus a penalty `-rho` for deciding a head class when
    /// the truth is a tail class.
    pub fn tail_sensitive(num_classes: usize, split: &TailSplit, rho: f64) -> Result<Self> {
        if !rho.is_finite() || rho < 0.0 {
            return Err(Error::input(format!(
                "penalty must be finite and >= 0, got {rho}"
            )));
        }
        if split.num_classes() != num_classes {
            return Err(Error::input(format!(
                "tail split is for {} classes, matrix for {num_classes}",
                split.num_classes()
            )));
        }
        let mut u = Self::one_hot(num_classes)?;
        for y in split.tail() {
            for d in split.head() {
                u.values[y * num_classes + d] = -rho;
            }
        }
        Ok(u)
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn get(&self, truth: usize, decision: usize) -> f64 {
        self.values[truth * self.num_classes + decision]
    }

    pub fn row(&self, truth: usize) -> &[f64] {
        &self.values[truth * self.num_classes..(truth + 1) * self.num_classes]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.num_classes)
    }

    /// Column `d`: utilities of decision `d` under every true class.
    pub fn column(&self, decision: usize) -> Vec<f64> {
        (0..self.num_classes)
            .map(|y| self.get(y, decision))
            .collect()
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.num_classes).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// Matrix with `c` added to every entry. Row maxima stay on the diagonal.
    pub fn shifted(&self, c: f64) -> Result<Self> {
        Self::from_flat(
            self.num_classes,
            self.values.iter().map(|v| v + c).collect(),
        )
    }

    /// Matrix with every entry multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if c.is_nan() || c <= 0.0 {
            return Err(Error::input("utility scale must be positive"));
        }
        Self::from_flat(
            self.num_classes,
            self.values.iter().map(|v| v * c).collect(),
        )
    }

    /// All-zero matrix; removes the utility term from the training objective.
    pub fn zeros(num_classes: usize) -> Result<Self> {
        Self::from_flat(num_classes, vec![0.0; num_classes * num_classes])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_hot_is_identity() {
        let u = UtilityMatrix::one_hot(3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(u.get(i, j), if i == j { 1.0 } else { 0.0 });
            }
        }
        assert!(u.is_symmetric());
        let trace: f64 = (0..3).map(|i| u.get(i, i)).sum();
        assert_eq!(trace, 3.0);
    }

    #[test]
    fn tail_sensitive_layout() {
        let split = TailSplit::new(4, 0.5).unwrap();
        let u = UtilityMatrix::tail_sensitive(4, &split, 1.0).unwrap();
        assert_eq!(u.get(3, 0), -1.0);
        assert_eq!(u.get(3, 3), 1.0);
        assert_eq!(u.get(0, 3), 0.0);
        assert_eq!(u.get(2, 1), -1.0);
        assert_eq!(u.get(2, 3), 0.0);
        assert!(!u.is_symmetric());

        let zero = UtilityMatrix::tail_sensitive(4, &split, 0.0).unwrap();
        assert_eq!(zero, UtilityMatrix::one_hot(4).unwrap());
        assert!(UtilityMatrix::tail_sensitive(4, &split, -0.1).is_err());
    }

    #[test]
    fn diagonal_is_row_max_for_any_penalty() {
        let split = TailSplit::new(7, 0.4).unwrap();
        for rho in [0.0, 0.5, 3.0, 100.0] {
            let u = UtilityMatrix::tail_sensitive(7, &split, rho).unwrap();
            for (i, row) in u.rows().enumerate() {
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                assert_eq!(row[i], max);
            }
        }
    }

    #[test]
    fn validation_names_the_row() {
        let err = UtilityMatrix::from_rows(vec![vec![1.0, 0.0], vec![2.0, 1.0]]).unwrap_err();
        assert!(matches!(err, Error::Utility { row: 1, .. }));
        let err = UtilityMatrix::from_rows(vec![vec![1.0, 0.0], vec![0.0]]).unwrap_err();
        assert!(matches!(err, Error::Utility { row: 1, .. }));
        let err = UtilityMatrix::from_rows(vec![vec![1.0, f64::NAN], vec![0.0, 1.0]]).unwrap_err();
        assert!(matches!(err, Error::Utility { row: 0, .. }));
        // ties with the diagonal are allowed
        assert!(UtilityMatrix::from_rows(vec![vec![1.0, 1.0], vec![0.0, 1.0]]).is_ok());
    }
}
