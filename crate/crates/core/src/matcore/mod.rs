//! Matrix containers and the numerical kernels shared by every other module.
//!
//! Matrices follow the data layout `X ∈ R^{d×n}`: rows are features and
//! columns are examples. Both containers are column-major and immutable once
//! built; kernels always return fresh outputs.

mod data;
mod dense;
mod eigen;
mod hadamard;
mod power;
mod sparse;
mod svd;

pub use data::DataMatrix;
pub use dense::{gram, DenseMatrix};
pub use eigen::{symmetric_eigen, SymmetricEigen};
pub use hadamard::{fwht, fwht_in_place, next_power_of_two};
pub use power::{spectral_norm, SpectralEstimate};
pub use sparse::SparseMatrix;
pub use svd::{svd_thin, SvdResult, DEFAULT_RANK_TOL};

/// A real linear map `R^ncols → R^nrows` that can also apply its transpose.
pub trait LinearOperator {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `out = A·x`; `out` has length `nrows` and is overwritten.
    fn apply(&self, x: &[f64], out: &mut [f64]);
    /// `out = Aᵀ·y`; `out` has length `ncols` and is overwritten.
    fn apply_transpose(&self, y: &[f64], out: &mut [f64]);
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
