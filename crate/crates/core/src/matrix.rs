//! Dense feature matrices.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Default ratio of smallest to largest singular value below which a matrix
/// is treated as rank deficient.
pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-10;

/// Dense `n x d` matrix of finite 64-bit floats; one row per instance.
#[derive(Debug, Clone, PartialEq)]
pub struct RealMatrix {
    inner: DMatrix<f64>,
}

impl RealMatrix {
    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::MismatchedLengths {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Self::from_dmatrix(DMatrix::from_row_slice(rows, cols, data))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n * d);
        for row in rows {
            if row.len() != d {
                return Err(Error::MismatchedLengths {
                    expected: d,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_row_major(n, d, &data)
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        Self::from_dmatrix(DMatrix::from_fn(rows, cols, f))
    }

    pub fn identity(d: usize) -> Result<Self> {
        Self::from_dmatrix(DMatrix::identity(d, d))
    }

    /// Wraps an existing matrix, validating shape and finiteness.
    pub fn from_dmatrix(inner: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = inner.shape();
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyMatrix { rows, cols });
        }
        for c in 0..cols {
            for r in 0..rows {
                if !inner[(r, c)].is_finite() {
                    return Err(Error::NonFinite { row: r, col: c });
                }
            }
        }
        Ok(Self { inner })
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.inner.nrows()
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.inner.ncols()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.inner[(row, col)]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.inner.row(i).iter().copied().collect()
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_dmatrix(self) -> DMatrix<f64> {
        self.inner
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        self.inner.transpose().as_slice().to_vec()
    }

    /// Computes `A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.ncols());
        (0..self.nrows())
            .map(|i| {
                let row = self.inner.row(i);
                row.iter().zip(x).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    /// Stacks `self` on top of `other`.
    pub fn vstack(&self, other: &RealMatrix) -> Result<RealMatrix> {
        if self.ncols() != other.ncols() {
            return Err(Error::MismatchedLengths {
                expected: self.ncols(),
                got: other.ncols(),
            });
        }
        let (n1, n2, d) = (self.nrows(), other.nrows(), self.ncols());
        let inner = DMatrix::from_fn(n1 + n2, d, |r, c| {
            if r < n1 {
                self.inner[(r, c)]
            } else {
                other.inner[(r - n1, c)]
            }
        });
        Ok(RealMatrix { inner })
    }

    /// Ratio of smallest to largest singular value (0 for a zero matrix).
    pub fn singular_value_ratio(&self) -> f64 {
        singular_ratio(&self.inner)
    }

    /// Fails with [`Error::RankDeficient`] unless the columns are numerically independent.
    pub fn ensure_full_column_rank(&self, tolerance: f64) -> Result<()> {
        if self.nrows() < self.ncols() {
            return Err(Error::RankDeficient {
                ratio: 0.0,
                tolerance,
            });
        }
        let ratio = self.singular_value_ratio();
        if !(ratio >= tolerance) {
            return Err(Error::RankDeficient { ratio, tolerance });
        }
        Ok(())
    }
}

pub(crate) fn singular_ratio(m: &DMatrix<f64>) -> f64 {
    let sv = if m.nrows() > m.ncols() {
        // Singular values of A equal those of R in A = QR.
        m.clone().qr().r().singular_values()
    } else {
        m.singular_values()
    };
    let max = sv.iter().copied().fold(0.0_f64, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if max > 0.0 {
        min / max
    } else {
        0.0
    }
}

/// `sum |x_i|^p`.
pub fn pow_norm(x: &[f64], p: f64) -> f64 {
    if p == 2.0 {
        x.iter().map(|v| v * v).sum()
    } else if p == 1.0 {
        x.iter().map(|v| v.abs()).sum()
    } else {
        x.iter().map(|v| v.abs().powf(p)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(matches!(
            RealMatrix::from_row_major(0, 2, &[]),
            Err(Error::EmptyMatrix { .. })
        ));
        assert!(matches!(
            RealMatrix::from_row_major(1, 2, &[1.0, f64::NAN]),
            Err(Error::NonFinite { row: 0, col: 1 })
        ));
        assert!(matches!(
            RealMatrix::from_row_major(2, 2, &[1.0]),
            Err(Error::MismatchedLengths { .. })
        ));
    }

    #[test]
    fn row_major_round_trip() {
        let data = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let m = RealMatrix::from_row_major(3, 2, &data).unwrap();
        assert_eq!(m.get(1, 0), 3.0);
        assert_eq!(m.row(2), vec![5.0, 6.0]);
        assert_eq!(m.to_row_major(), data.to_vec());
        assert_eq!(m.mul_vec(&[1.0, -1.0]), vec![-1.0, -1.0, -1.0]);
    }

    #[test]
    fn rank_checks() {
        let m = RealMatrix::from_row_major(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]).unwrap();
        assert!(matches!(
            m.ensure_full_column_rank(1e-10),
            Err(Error::RankDeficient { .. })
        ));
        let wide = RealMatrix::from_row_major(1, 2, &[1.0, 0.0]).unwrap();
        assert!(wide.ensure_full_column_rank(1e-10).is_err());
        RealMatrix::identity(3)
            .unwrap()
            .ensure_full_column_rank(1e-10)
            .unwrap();
    }

    #[test]
    fn vstack_shapes() {
        let a = RealMatrix::identity(2).unwrap();
        let s = a.vstack(&a).unwrap();
        assert_eq!((s.nrows(), s.ncols()), (4, 2));
        assert_eq!(s.get(3, 1), 1.0);
    }
}
