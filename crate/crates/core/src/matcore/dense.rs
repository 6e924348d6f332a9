use crate::error::{check_dim, Error, Result};
use crate::matcore::{axpy, dot, LinearOperator};
use serde::{Deserialize, Serialize};

/// Column-major dense matrix with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DenseMatrix {
    /// Builds a matrix from column-major values.
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        check_dim("DenseMatrix::new values", rows * cols, values.len())?;
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite entry at ({}, {})",
                pos % rows.max(1),
                pos / rows.max(1)
            )));
        }
        Ok(Self { rows, cols, values })
    }

    pub(crate) fn from_vec_unchecked(rows: usize, cols: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), rows * cols);
        Self { rows, cols, values }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_vec_unchecked(rows, cols, vec![0.0; rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.values[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut values = vec![0.0; n * n];
        for (i, &d) in diag.iter().enumerate() {
            values[i * n + i] = d;
        }
        Self::new(n, n, values)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                values.push(f(i, j));
            }
        }
        Self::new(rows, cols, values)
    }

    /// Builds a matrix from row vectors (convenient for literals).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        for r in rows {
            check_dim("DenseMatrix::from_rows row length", ncols, r.len())?;
        }
        Self::from_fn(nrows, ncols, |i, j| rows[i][j])
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let ncols = columns.len();
        let nrows = columns.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(nrows * ncols);
        for c in columns {
            check_dim("DenseMatrix::from_columns column length", nrows, c.len())?;
            values.extend_from_slice(c);
        }
        Self::new(nrows, ncols, values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.rows + i]
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.values[j * self.rows..(j + 1) * self.rows]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.cols).map(move |j| self.column(j))
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.cols).map(|j| self.get(i, j)).collect()
    }

    /// Column-major storage.
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub(crate) fn column_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.values[j * self.rows..(j + 1) * self.rows]
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for j in 0..self.cols {
            for i in 0..self.rows {
                out.values[i * self.cols + j] = self.values[j * self.rows + i];
            }
        }
        out
    }

    /// `self · other`.
    pub fn matmul(&self, other: &DenseMatrix) -> Result<Self> {
        check_dim("matmul inner dimension", self.cols, other.rows)?;
        let mut out = Self::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let dst = &mut out.values[j * self.rows..(j + 1) * self.rows];
            for (k, &b) in other.column(j).iter().enumerate() {
                if b != 0.0 {
                    axpy(b, self.column(k), dst);
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · other`.
    pub fn tr_matmul(&self, other: &DenseMatrix) -> Result<Self> {
        check_dim("tr_matmul shared rows", self.rows, other.rows)?;
        let mut out = Self::zeros(self.cols, other.cols);
        for j in 0..other.cols {
            let b = other.column(j);
            for i in 0..self.cols {
                out.values[j * self.cols + i] = dot(self.column(i), b);
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("mul_vec", self.cols, x.len())?;
        let mut out = vec![0.0; self.rows];
        self.apply(x, &mut out);
        Ok(out)
    }

    pub fn tr_mul_vec(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_dim("tr_mul_vec", self.rows, y.len())?;
        let mut out = vec![0.0; self.cols];
        self.apply_transpose(y, &mut out);
        Ok(out)
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<Self> {
        check_dim("sub rows", self.rows, other.rows)?;
        check_dim("sub cols", self.cols, other.cols)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Self::from_vec_unchecked(self.rows, self.cols, values))
    }

    pub fn add(&self, other: &DenseMatrix) -> Result<Self> {
        check_dim("add rows", self.rows, other.rows)?;
        check_dim("add cols", self.cols, other.cols)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(Self::from_vec_unchecked(self.rows, self.cols, values))
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self::from_vec_unchecked(self.rows, self.cols, self.values.iter().map(|v| alpha * v).collect())
    }

    pub fn frobenius_norm(&self) -> f64 {
        dot(&self.values, &self.values).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn select_columns(&self, idx: &[usize]) -> Self {
        let mut values = Vec::with_capacity(self.rows * idx.len());
        for &j in idx {
            values.extend_from_slice(self.column(j));
        }
        Self::from_vec_unchecked(self.rows, idx.len(), values)
    }

    /// First `k` columns.
    pub fn leading_columns(&self, k: usize) -> Self {
        let k = k.min(self.cols);
        Self::from_vec_unchecked(self.rows, k, self.values[..k * self.rows].to_vec())
    }

    /// Stacks `other` below `self`.
    pub fn vstack(&self, other: &DenseMatrix) -> Result<Self> {
        check_dim("vstack cols", self.cols, other.cols)?;
        let rows = self.rows + other.rows;
        let mut values = Vec::with_capacity(rows * self.cols);
        for j in 0..self.cols {
            values.extend_from_slice(self.column(j));
            values.extend_from_slice(other.column(j));
        }
        Ok(Self::from_vec_unchecked(rows, self.cols, values))
    }
}

impl LinearOperator for DenseMatrix {
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
                axpy(xj, self.column(j), out);
            }
        }
    }

    fn apply_transpose(&self, y: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = dot(self.column(j), y);
        }
    }
}

/// `K = YᵀY`, symmetrized as `(K + Kᵀ)/2`.
pub fn gram(y: &DenseMatrix) -> Result<DenseMatrix> {
    if y.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("gram: non-finite entry".into()));
    }
    let mut k = y.tr_matmul(y)?;
    let m = k.cols;
    for j in 0..m {
        for i in 0..j {
            let avg = 0.5 * (k.values[j * m + i] + k.values[i * m + j]);
            k.values[j * m + i] = avg;
            k.values[i * m + j] = avg;
        }
    }
    Ok(k)
}
