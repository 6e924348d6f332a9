use crate::error::{Error, Result};
use crate::matcore::{dot, DenseMatrix};

/// Relative singular-value cutoff used when callers have no better choice.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

const JACOBI_TOL: f64 = 1e-15;
const MAX_SWEEPS: usize = 80;

/// Thin SVD `M = U·diag(σ)·Vᵀ` truncated to the numerical rank.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdResult {
    u: DenseMatrix,
    singular_values: Vec<f64>,
    v: DenseMatrix,
}

impl SvdResult {
    pub fn u(&self) -> &DenseMatrix {
        &self.u
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn v(&self) -> &DenseMatrix {
        &self.v
    }

    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    pub fn into_parts(self) -> (DenseMatrix, Vec<f64>, DenseMatrix) {
        (self.u, self.singular_values, self.v)
    }

    /// `U·diag(σ)·Vᵀ`.
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut us = self.u.clone();
        for (j, &s) in self.singular_values.iter().enumerate() {
            us.column_mut(j).iter_mut().for_each(|x| *x *= s);
        }
        us.matmul(&self.v.transpose()).expect("shapes agree by construction")
    }
}

/// Thin SVD by Householder QR followed by one-sided (Hestenes) Jacobi on the
/// triangular factor. Singular triplets with `σ ≤ rank_tol·σ_max` are dropped.
pub fn svd_thin(m: &DenseMatrix, rank_tol: f64) -> Result<SvdResult> {
    if !(0.0..1.0).contains(&rank_tol) {
        return Err(Error::InvalidInput(format!("rank_tol {rank_tol} outside [0, 1)")));
    }
    if m.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("svd_thin: non-finite entry".into()));
    }
    if m.rows() >= m.cols() {
        svd_tall(m, rank_tol)
    } else {
        let t = svd_tall(&m.transpose(), rank_tol)?;
        Ok(SvdResult { u: t.v, singular_values: t.singular_values, v: t.u })
    }
}

fn svd_tall(a: &DenseMatrix, rank_tol: f64) -> Result<SvdResult> {
    let (rows, cols) = (a.rows(), a.cols());
    if cols == 0 {
        return Ok(SvdResult {
            u: DenseMatrix::zeros(rows, 0),
            singular_values: Vec::new(),
            v: DenseMatrix::zeros(0, 0),
        });
    }
    let (q, r) = householder_qr(a);
    let (w, v) = one_sided_jacobi(r)?;

    let norms: Vec<f64> = w.columns().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));
    let sigma_max = norms[order[0]];
    let keep: Vec<usize> = order
        .into_iter()
        .filter(|&j| norms[j] > 0.0 && norms[j] > rank_tol * sigma_max)
        .collect();

    let mut ur = DenseMatrix::zeros(cols, keep.len());
    let mut vk = DenseMatrix::zeros(cols, keep.len());
    let mut singular_values = Vec::with_capacity(keep.len());
    for (dst, &j) in keep.iter().enumerate() {
        let s = norms[j];
        singular_values.push(s);
        for (o, x) in ur.column_mut(dst).iter_mut().zip(w.column(j)) {
            *o = x / s;
        }
        vk.column_mut(dst).copy_from_slice(v.column(j));
    }
    let u = q.matmul(&ur)?;
    Ok(SvdResult { u, singular_values, v: vk })
}

/// Thin Householder QR of a tall matrix: returns `Q ∈ R^{rows×cols}` with
/// orthonormal columns and upper-triangular `R ∈ R^{cols×cols}`.
fn householder_qr(a: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    let (rows, cols) = (a.rows(), a.cols());
    let mut work = a.clone();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(cols);
    for k in 0..cols {
        let x = &work.column(k)[k..];
        let norm = dot(x, x).sqrt();
        let mut v = x.to_vec();
        if norm == 0.0 {
            reflectors.push(Vec::new());
            continue;
        }
        let alpha = if v[0] >= 0.0 { -norm } else { norm };
        v[0] -= alpha;
        let vn = dot(&v, &v).sqrt();
        v.iter_mut().for_each(|t| *t /= vn);
        for j in k..cols {
            let col = &mut work.column_mut(j)[k..];
            let p = 2.0 * dot(&v, col);
            for (c, vi) in col.iter_mut().zip(&v) {
                *c -= p * vi;
            }
        }
        reflectors.push(v);
    }
    let mut r = DenseMatrix::zeros(cols, cols);
    for j in 0..cols {
        let src = work.column(j);
        r.column_mut(j)[..=j].copy_from_slice(&src[..=j]);
    }
    let mut q = DenseMatrix::zeros(rows, cols);
    for j in 0..cols {
        q.column_mut(j)[j] = 1.0;
    }
    for (k, v) in reflectors.iter().enumerate().rev() {
        if v.is_empty() {
            continue;
        }
        for j in 0..cols {
            let col = &mut q.column_mut(j)[k..];
            let p = 2.0 * dot(v, col);
            for (c, vi) in col.iter_mut().zip(v) {
                *c -= p * vi;
            }
        }
    }
    (q, r)
}

/// Orthogonalizes the columns of `w` by plane rotations, accumulating them in
/// `v`, so that on return `W_in · V = W_out` with mutually orthogonal columns.
fn one_sided_jacobi(mut w: DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    let n = w.cols();
    let rows = w.rows();
    let mut v = DenseMatrix::identity(n);
    let mut norms: Vec<f64> = w.columns().map(|c| dot(c, c)).collect();
    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = norms[p];
                let beta = norms[q];
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let gamma = dot(w.column(p), w.column(q));
                if gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(w.values_mut(), rows, p, q, c, s);
                rotate_columns(v.values_mut(), n, p, q, c, s);
                norms[p] = dot(w.column(p), w.column(p));
                norms[q] = dot(w.column(q), w.column(q));
            }
        }
        if !rotated {
            return Ok((w, v));
        }
    }
    Err(Error::NumericalFailure(format!(
        "one-sided Jacobi did not converge in {MAX_SWEEPS} sweeps"
    )))
}

fn rotate_columns(values: &mut [f64], rows: usize, p: usize, q: usize, c: f64, s: f64) {
    debug_assert!(p < q);
    let (head, tail) = values.split_at_mut(q * rows);
    let cp = &mut head[p * rows..(p + 1) * rows];
    let cq = &mut tail[..rows];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn orthonormality_error(m: &DenseMatrix) -> f64 {
        m.tr_matmul(m)
            .unwrap()
            .sub(&DenseMatrix::identity(m.cols()))
            .unwrap()
            .frobenius_norm()
    }

    #[test]
    fn identity_has_unit_singular_values() {
        let svd = svd_thin(&DenseMatrix::identity(3), DEFAULT_RANK_TOL).unwrap();
        assert_eq!(svd.rank(), 3);
        for s in svd.singular_values() {
            assert!((s - 1.0).abs() < 1e-14);
        }
        let uvt = svd.u().matmul(&svd.v().transpose()).unwrap();
        assert!(orthonormality_error(&uvt) < 1e-12);
    }

    #[test]
    fn diagonal_singular_values_sorted() {
        let m = DenseMatrix::from_diagonal(&[1.0, 3.0, 2.0]).unwrap();
        let svd = svd_thin(&m, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(svd.singular_values(), &[3.0, 2.0, 1.0]);
    }

    #[test]
    fn wide_matrix_and_rank_truncation() {
        // Rank 1: second row is twice the first.
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0, 3.0, 4.0], vec![2.0, 4.0, 6.0, 8.0]]).unwrap();
        let svd = svd_thin(&m, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(svd.rank(), 1);
        assert_eq!(svd.u().rows(), 2);
        assert_eq!(svd.v().rows(), 4);
        let err = svd.reconstruct().sub(&m).unwrap().frobenius_norm() / m.frobenius_norm();
        assert!(err < 1e-12);
    }

    #[test]
    fn zero_matrix_has_empty_svd() {
        let svd = svd_thin(&DenseMatrix::zeros(4, 3), DEFAULT_RANK_TOL).unwrap();
        assert_eq!(svd.rank(), 0);
    }

    #[test]
    fn rejects_bad_tolerance() {
        assert!(svd_thin(&DenseMatrix::identity(2), 1.0).is_err());
        assert!(svd_thin(&DenseMatrix::identity(2), -0.1).is_err());
    }
}
