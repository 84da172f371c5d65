//! Flat row-major feature matrix shared by all estimators.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DataError {
    #[error("row {row} has {got} features, expected {expected}")]
    RaggedRow { row: usize, expected: usize, got: usize },
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix contains a non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
}

/// Dense row-major matrix of f64 features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    n_cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(n_cols: usize) -> Self {
        Self { n_cols, data: Vec::new() }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, DataError> {
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut m = Self { n_cols, data: Vec::with_capacity(rows.len() * n_cols) };
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n_cols {
                return Err(DataError::RaggedRow { row: i, expected: n_cols, got: r.len() });
            }
            m.data.extend_from_slice(r);
        }
        Ok(m)
    }

    pub fn from_flat(n_cols: usize, data: Vec<f64>) -> Result<Self, DataError> {
        if n_cols == 0 || data.len() % n_cols != 0 {
            return Err(DataError::DimensionMismatch { expected: n_cols, got: data.len() });
        }
        Ok(Self { n_cols, data })
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<(), DataError> {
        if row.len() != self.n_cols {
            return Err(DataError::DimensionMismatch { expected: self.n_cols, got: row.len() });
        }
        self.data.extend_from_slice(row);
        Ok(())
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        if self.n_cols == 0 {
            0
        } else {
            self.data.len() / self.n_cols
        }
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_cols)
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows().map(move |r| r[j])
    }

    /// Verify every entry is finite.
    pub fn check_finite(&self) -> Result<(), DataError> {
        for (i, row) in self.rows().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(DataError::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn rows_round_trip() {
        let m = FeatureMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(m.n_rows(), 2);
        assert_eq!(m.n_cols(), 2);
        assert_eq!(m.row(1), &[3.0, 4.0]);
        assert_eq!(m.column(0).collect::<Vec<_>>(), vec![1.0, 3.0]);
    }

    #[test]
    fn ragged_rejected() {
        let err = FeatureMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]).unwrap_err();
        assert_eq!(err, DataError::RaggedRow { row: 1, expected: 2, got: 1 });
    }

    #[test]
    fn non_finite_detected() {
        let m = FeatureMatrix::from_rows(&[vec![1.0, f64::NAN]]).unwrap();
        assert_eq!(m.check_finite().unwrap_err(), DataError::NonFinite { row: 0, col: 1 });
    }
}
