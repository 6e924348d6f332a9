use crate::error::{check_dim, Result};
use crate::matcore::{dot, DenseMatrix, LinearOperator, SparseMatrix};
use serde::{Deserialize, Serialize};

/// A data matrix `X ∈ R^{d×n}` in either storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DataMatrix {
    Dense(DenseMatrix),
    Sparse(SparseMatrix),
}

impl From<DenseMatrix> for DataMatrix {
    fn from(m: DenseMatrix) -> Self {
        DataMatrix::Dense(m)
    }
}

impl From<SparseMatrix> for DataMatrix {
    fn from(m: SparseMatrix) -> Self {
        DataMatrix::Sparse(m)
    }
}

impl DataMatrix {
    pub fn rows(&self) -> usize {
        match self {
            DataMatrix::Dense(m) => m.rows(),
            DataMatrix::Sparse(m) => m.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            DataMatrix::Dense(m) => m.cols(),
            DataMatrix::Sparse(m) => m.cols(),
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self, DataMatrix::Sparse(_))
    }

    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            DataMatrix::Dense(m) => m.clone(),
            DataMatrix::Sparse(m) => m.to_dense(),
        }
    }

    /// Calls `f(row, value)` for every stored entry of column `j`.
    pub fn for_each_in_column(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        match self {
            DataMatrix::Dense(m) => {
                for (r, &v) in m.column(j).iter().enumerate() {
                    if v != 0.0 {
                        f(r, v);
                    }
                }
            }
            DataMatrix::Sparse(m) => {
                let (idx, val) = m.column(j);
                for (&r, &v) in idx.iter().zip(val) {
                    f(r, v);
                }
            }
        }
    }

    /// `x_jᵀ v`.
    pub fn column_dot(&self, j: usize, v: &[f64]) -> f64 {
        match self {
            DataMatrix::Dense(m) => dot(m.column(j), v),
            DataMatrix::Sparse(m) => {
                let (idx, val) = m.column(j);
                idx.iter().zip(val).map(|(&r, &x)| x * v[r]).sum()
            }
        }
    }

    /// `v += alpha · x_j`.
    pub fn column_axpy(&self, j: usize, alpha: f64, v: &mut [f64]) {
        match self {
            DataMatrix::Dense(m) => crate::matcore::axpy(alpha, m.column(j), v),
            DataMatrix::Sparse(m) => {
                let (idx, val) = m.column(j);
                for (&r, &x) in idx.iter().zip(val) {
                    v[r] += alpha * x;
                }
            }
        }
    }

    pub fn column_norm_sq(&self, j: usize) -> f64 {
        match self {
            DataMatrix::Dense(m) => dot(m.column(j), m.column(j)),
            DataMatrix::Sparse(m) => m.column(j).1.iter().map(|v| v * v).sum(),
        }
    }

    pub fn column_dense(&self, j: usize) -> Vec<f64> {
        match self {
            DataMatrix::Dense(m) => m.column(j).to_vec(),
            DataMatrix::Sparse(m) => {
                let mut out = vec![0.0; m.rows()];
                let (idx, val) = m.column(j);
                for (&r, &v) in idx.iter().zip(val) {
                    out[r] = v;
                }
                out
            }
        }
    }

    pub fn select_columns(&self, idx: &[usize]) -> Self {
        match self {
            DataMatrix::Dense(m) => DataMatrix::Dense(m.select_columns(idx)),
            DataMatrix::Sparse(m) => DataMatrix::Sparse(m.select_columns(idx)),
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("DataMatrix::mul_vec", self.cols(), x.len())?;
        let mut out = vec![0.0; self.rows()];
        self.apply(x, &mut out);
        Ok(out)
    }

    pub fn tr_mul_vec(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_dim("DataMatrix::tr_mul_vec", self.rows(), y.len())?;
        let mut out = vec![0.0; self.cols()];
        self.apply_transpose(y, &mut out);
        Ok(out)
    }

    /// `Uᵀ X` for a dense `U ∈ R^{d×k}`, touching only stored entries of `X`.
    pub fn left_tr_mul(&self, u: &DenseMatrix) -> Result<DenseMatrix> {
        check_dim("left_tr_mul shared rows", u.rows(), self.rows())?;
        let k = u.cols();
        let n = self.cols();
        let mut out = DenseMatrix::zeros(k, n);
        match self {
            DataMatrix::Dense(x) => {
                for j in 0..n {
                    let xj = x.column(j);
                    let dst = out.column_mut(j);
                    for (c, o) in dst.iter_mut().enumerate() {
                        *o = dot(u.column(c), xj);
                    }
                }
            }
            DataMatrix::Sparse(x) => {
                for j in 0..n {
                    let (idx, val) = x.column(j);
                    let dst = out.column_mut(j);
                    for (c, o) in dst.iter_mut().enumerate() {
                        let uc = u.column(c);
                        *o = idx.iter().zip(val).map(|(&r, &v)| v * uc[r]).sum();
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> f64 {
        match self {
            DataMatrix::Dense(m) => m.frobenius_norm(),
            DataMatrix::Sparse(m) => m.values().iter().map(|v| v * v).sum::<f64>().sqrt(),
        }
    }
}

impl LinearOperator for DataMatrix {
    fn nrows(&self) -> usize {
        self.rows()
    }

    fn ncols(&self) -> usize {
        self.cols()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        match self {
            DataMatrix::Dense(m) => m.apply(x, out),
            DataMatrix::Sparse(m) => m.apply(x, out),
        }
    }

    fn apply_transpose(&self, y: &[f64], out: &mut [f64]) {
        match self {
            DataMatrix::Dense(m) => m.apply_transpose(y, out),
            DataMatrix::Sparse(m) => m.apply_transpose(y, out),
        }
    }
}
