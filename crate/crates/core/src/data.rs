//! Row-major covariate matrices and paired samples.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense row-major `n x d` matrix of covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    data: Vec<T>,
    rows: usize,
    cols: usize,
}

impl<T: Scalar> Matrix<T> {
    pub fn from_rows_vec(data: Vec<T>, rows: usize, cols: usize) -> Result<Self> {
        if cols == 0 {
            return Err(Error::Config("matrix needs at least one column".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::Config(format!("expected {} entries for a {rows}x{cols} matrix, got {}", rows * cols, data.len())));
        }
        Ok(Self { data, rows, cols })
    }

    /// Single-column matrix.
    pub fn column(values: Vec<T>) -> Self {
        let rows = values.len();
        Self { data: values, rows, cols: 1 }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(1, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::Parse { row: i + 1, message: "ragged row".into() });
            }
            data.extend_from_slice(r);
        }
        Self::from_rows_vec(data, rows.len(), cols)
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn column_values(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// Rows reordered by `perm` (row `k` of the result is row `perm[k]`).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for &p in perm {
            data.extend_from_slice(self.row(p));
        }
        Self { data, rows: perm.len(), cols: self.cols }
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hstack(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return Err(Error::Config("row count mismatch in hstack".into()));
        }
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(other.row(i));
        }
        Ok(Self { data, rows: self.rows, cols })
    }

    /// Largest coordinate-wise range (max - min) over the columns.
    pub fn max_range(&self) -> T {
        (0..self.cols)
            .map(|j| {
                let (lo, hi) = (0..self.rows).fold((T::infinity(), T::neg_infinity()), |(lo, hi), i| {
                    let v = self.get(i, j);
                    (lo.min(v), hi.max(v))
                });
                hi - lo
            })
            .fold(T::zero(), T::max)
    }

    pub fn cast<U: Scalar>(&self) -> Matrix<U> {
        Matrix { data: self.data.iter().map(|&v| U::lit(v.as_f64())).collect(), rows: self.rows, cols: self.cols }
    }
}

/// Raw observations `(X_i, Y_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T> {
    pub x: Matrix<T>,
    pub y: Vec<T>,
}

impl<T: Scalar> Sample<T> {
    pub fn new(x: Matrix<T>, y: Vec<T>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::Config(format!("covariate rows ({}) and responses ({}) differ", x.nrows(), y.len())));
        }
        for (i, yi) in y.iter().enumerate() {
            if !yi.is_finite() || x.row(i).iter().any(|v| !v.is_finite()) {
                return Err(Error::Parse { row: i + 1, message: "non-finite value".into() });
            }
        }
        Ok(Self { x, y })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.y.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self { x: self.x.permuted(perm), y: perm.iter().map(|&p| self.y[p]).collect() }
    }

    /// Same covariates with new responses.
    pub fn with_responses(&self, y: Vec<T>) -> Self {
        Self { x: self.x.clone(), y }
    }
}
