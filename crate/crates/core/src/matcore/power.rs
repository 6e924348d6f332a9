use crate::matcore::{dot, norm2, LinearOperator};
use crate::rng;
use rand_distr::{Distribution, StandardNormal};

/// Result of a power-iteration run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEstimate {
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Estimates `σ₁(A)` by power iteration on `AᵀA` from a seeded Gaussian start.
///
/// Stops once the relative change of the estimate falls below `tol` and the
/// Rayleigh residual `‖AᵀAv − θv‖` is below `√tol·θ`. When `max_iter` runs out
/// the best estimate so far is returned with `converged = false`.
pub fn spectral_norm(op: &impl LinearOperator, tol: f64, max_iter: usize, seed: u64) -> SpectralEstimate {
    let (rows, cols) = (op.nrows(), op.ncols());
    if rows == 0 || cols == 0 {
        return SpectralEstimate { value: 0.0, converged: true, iterations: 0 };
    }
    let mut rng = rng::stream(seed);
    let mut v: Vec<f64> = (0..cols).map(|_| StandardNormal.sample(&mut rng)).collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut u = vec![0.0; rows];
    let mut w = vec![0.0; cols];
    let mut best = 0.0f64;
    let mut prev = f64::NAN;
    let resid_tol = tol.sqrt();
    for iter in 1..=max_iter {
        op.apply(&v, &mut u);
        op.apply_transpose(&u, &mut w);
        let theta = dot(&u, &u);
        let sigma = theta.sqrt();
        best = best.max(sigma);
        let wn = norm2(&w);
        if wn == 0.0 || theta == 0.0 {
            // v is in the null space of A.
            if iter == 1 {
                return SpectralEstimate { value: 0.0, converged: true, iterations: iter };
            }
            return SpectralEstimate { value: best, converged: false, iterations: iter };
        }
        let resid: f64 = w
            .iter()
            .zip(&v)
            .map(|(wi, vi)| (wi - theta * vi).powi(2))
            .sum::<f64>()
            .sqrt();
        let change_ok = prev.is_finite() && (sigma - prev).abs() <= tol * sigma;
        if change_ok && resid <= resid_tol * theta {
            return SpectralEstimate { value: sigma, converged: true, iterations: iter };
        }
        prev = sigma;
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / wn;
        }
    }
    SpectralEstimate { value: best, converged: false, iterations: max_iter }
}
