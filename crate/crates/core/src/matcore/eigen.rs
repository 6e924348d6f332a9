use crate::error::{check_dim, Error, Result};
use crate::matcore::DenseMatrix;

const MAX_SWEEPS: usize = 100;

/// Eigendecomposition `K = V·diag(λ)·Vᵀ` of a symmetric matrix, eigenvalues in
/// descending order.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: DenseMatrix,
}

/// Cyclic two-sided Jacobi eigensolver for small symmetric matrices.
pub fn symmetric_eigen(k: &DenseMatrix) -> Result<SymmetricEigen> {
    check_dim("symmetric_eigen square", k.rows(), k.cols())?;
    let n = k.rows();
    if k.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("symmetric_eigen: non-finite entry".into()));
    }
    let asym = (0..n)
        .flat_map(|j| (0..j).map(move |i| (i, j)))
        .map(|(i, j)| (k.get(i, j) - k.get(j, i)).abs())
        .fold(0.0f64, f64::max);
    if asym > 1e-12 * k.max_abs().max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidInput(format!("matrix not symmetric (max asymmetry {asym:e})")));
    }

    let mut a = k.clone();
    let mut v = DenseMatrix::identity(n);
    let scale = k.frobenius_norm();
    let mut converged = n <= 1 || scale == 0.0;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let off: f64 = (0..n)
            .flat_map(|j| (0..j).map(move |i| (i, j)))
            .map(|(i, j)| a.get(i, j).powi(2))
            .sum();
        if off.sqrt() <= 1e-16 * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.is_finite() {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                } else {
                    0.0
                };
                if t == 0.0 {
                    continue;
                }
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                apply_rotation(&mut a, &mut v, p, q, c, s);
            }
        }
    }
    if !converged {
        return Err(Error::NumericalFailure(format!(
            "Jacobi eigensolver did not converge in {MAX_SWEEPS} sweeps"
        )));
    }

    let diag: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diag[j].total_cmp(&diag[i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| diag[i]).collect();
    let vectors = v.select_columns(&order);
    Ok(SymmetricEigen { values, vectors })
}

/// `A ← JᵀAJ`, `V ← VJ` for the rotation `J` in the (p, q) plane.
fn apply_rotation(a: &mut DenseMatrix, v: &mut DenseMatrix, p: usize, q: usize, c: f64, s: f64) {
    let n = a.rows();
    let vals = a.values_mut();
    for r in 0..n {
        let arp = vals[p * n + r];
        let arq = vals[q * n + r];
        vals[p * n + r] = c * arp - s * arq;
        vals[q * n + r] = s * arp + c * arq;
    }
    for col in 0..n {
        let apc = vals[col * n + p];
        let aqc = vals[col * n + q];
        vals[col * n + p] = c * apc - s * aqc;
        vals[col * n + q] = s * apc + c * aqc;
    }
    let vv = v.values_mut();
    for r in 0..n {
        let vrp = vv[p * n + r];
        let vrq = vv[q * n + r];
        vv[p * n + r] = c * vrp - s * vrq;
        vv[q * n + r] = s * vrp + c * vrq;
    }
}
