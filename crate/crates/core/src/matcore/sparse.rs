use crate::error::{check_dim, Error, Result};
use crate::matcore::{DenseMatrix, LinearOperator};
use serde::{Deserialize, Serialize};

/// Compressed sparse column matrix.
///
/// Row indices inside a column are strictly increasing and every stored value
/// is finite and nonzero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn new(
        rows: usize,
        cols: usize,
        col_ptr: Vec<usize>,
        row_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        check_dim("SparseMatrix col_ptr", cols + 1, col_ptr.len())?;
        check_dim("SparseMatrix values", row_idx.len(), values.len())?;
        if col_ptr[0] != 0 || col_ptr[cols] != row_idx.len() {
            return Err(Error::InvalidInput("column pointers do not span the entries".into()));
        }
        for j in 0..cols {
            let (lo, hi) = (col_ptr[j], col_ptr[j + 1]);
            if lo > hi {
                return Err(Error::InvalidInput(format!("column pointers decrease at column {j}")));
            }
            let idx = &row_idx[lo..hi];
            if idx.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidInput(format!(
                    "row indices not strictly increasing in column {j}"
                )));
            }
            if idx.last().is_some_and(|&r| r >= rows) {
                return Err(Error::InvalidInput(format!("row index out of range in column {j}")));
            }
            if values[lo..hi].iter().any(|v| !v.is_finite() || *v == 0.0) {
                return Err(Error::InvalidInput(format!(
                    "stored value zero or non-finite in column {j}"
                )));
            }
        }
        Ok(Self { rows, cols, col_ptr, row_idx, values })
    }

    /// Builds from per-column `(row, value)` lists. Entries are sorted, exact
    /// zeros are dropped and duplicate rows rejected.
    pub fn from_columns(rows: usize, columns: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let cols = columns.len();
        let mut col_ptr = Vec::with_capacity(cols + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for mut col in columns {
            col.sort_by_key(|&(r, _)| r);
            for (r, v) in col {
                if v != 0.0 {
                    row_idx.push(r);
                    values.push(v);
                }
            }
            col_ptr.push(row_idx.len());
        }
        Self::new(rows, cols, col_ptr, row_idx, values)
    }

    pub fn from_dense(m: &DenseMatrix) -> Self {
        let columns = m
            .columns()
            .map(|c| c.iter().copied().enumerate().filter(|&(_, v)| v != 0.0).collect())
            .collect();
        Self::from_columns(m.rows(), columns).expect("dense matrix entries are finite")
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, col_ptr: vec![0; cols + 1], row_idx: Vec::new(), values: Vec::new() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Row indices and values of column `j`.
    pub fn column(&self, j: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.col_ptr[j], self.col_ptr[j + 1]);
        (&self.row_idx[lo..hi], &self.values[lo..hi])
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_indices(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for j in 0..self.cols {
            let (idx, val) = self.column(j);
            let dst = out.column_mut(j);
            for (&r, &v) in idx.iter().zip(val) {
                dst[r] = v;
            }
        }
        out
    }

    pub fn select_columns(&self, idx: &[usize]) -> Self {
        let mut col_ptr = Vec::with_capacity(idx.len() + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for &j in idx {
            let (r, v) = self.column(j);
            row_idx.extend_from_slice(r);
            values.extend_from_slice(v);
            col_ptr.push(row_idx.len());
        }
        Self { rows: self.rows, cols: idx.len(), col_ptr, row_idx, values }
    }

    pub fn add(&self, other: &SparseMatrix) -> Result<Self> {
        check_dim("sparse add rows", self.rows, other.rows)?;
        check_dim("sparse add cols", self.cols, other.cols)?;
        let columns = (0..self.cols)
            .map(|j| {
                let mut merged: Vec<(usize, f64)> = Vec::new();
                let (ra, va) = self.column(j);
                let (rb, vb) = other.column(j);
                let (mut a, mut b) = (0, 0);
                while a < ra.len() || b < rb.len() {
                    if b == rb.len() || (a < ra.len() && ra[a] < rb[b]) {
                        merged.push((ra[a], va[a]));
                        a += 1;
                    } else if a == ra.len() || rb[b] < ra[a] {
                        merged.push((rb[b], vb[b]));
                        b += 1;
                    } else {
                        merged.push((ra[a], va[a] + vb[b]));
                        a += 1;
                        b += 1;
                    }
                }
                merged
            })
            .collect();
        Self::from_columns(self.rows, columns)
    }
}

impl LinearOperator for SparseMatrix {
    fn nrows(&self) -> usize {
        self.rows
    }

    fn ncols(&self) -> usize {
        self.cols
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                let (idx, val) = self.column(j);
                for (&r, &v) in idx.iter().zip(val) {
                    out[r] += v * xj;
                }
            }
        }
    }

    fn apply_transpose(&self, y: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            let (idx, val) = self.column(j);
            *o = idx.iter().zip(val).map(|(&r, &v)| v * y[r]).sum();
        }
    }
}
