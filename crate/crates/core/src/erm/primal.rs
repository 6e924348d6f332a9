use super::lbfgs::{self, Minimum};
use super::{class_scores, log_sum_exp, ErmProblem, ErmSolution, Loss};
use crate::error::{Error, Result};

/// Final smoothing width of the hinge. The smoothed loss is within
/// `HINGE_SMOOTHING / 2` of the hinge everywhere.
pub const HINGE_SMOOTHING: f64 = 1e-4;
const CONTINUATION: [f64; 4] = [1e-1, 1e-2, 1e-3, HINGE_SMOOTHING];

/// Deterministic primal solver.
///
/// Softmax is minimized directly by L-BFGS until the gradient norm is at
/// most `tol`. The hinge is replaced by its quadratically smoothed version
///
/// `ℓ_μ(t) = 0` for `t ≥ 1`, `(1−t)²/(2μ)` for `1−μ < t < 1`, `1 − t − μ/2` otherwise,
///
/// (`t = y·wᵀx`), warm-started through decreasing `μ` down to
/// [`HINGE_SMOOTHING`]. `primal_obj` always reports the exact objective.
pub fn solve_primal(p: &ErmProblem, tol: f64, max_iter: usize) -> Result<ErmSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    let dim = p.dim() * p.loss.outputs();
    let (min, iterations) = match p.loss {
        Loss::Hinge => {
            let mut x0 = vec![0.0; dim];
            let mut total = 0;
            let mut last = None;
            for mu in CONTINUATION {
                let res = lbfgs::minimize(|w, g| smoothed_hinge(p, mu, w, g), x0, tol, max_iter.saturating_sub(total));
                total += res.iterations;
                x0 = res.x.clone();
                last = Some(res);
            }
            (last.expect("at least one stage"), total)
        }
        Loss::Softmax { classes } => {
            let res = lbfgs::minimize(|w, g| softmax(p, classes, w, g), vec![0.0; dim], tol, max_iter);
            let it = res.iterations;
            (res, it)
        }
    };
    let Minimum { x, grad_norm, converged, trace, .. } = min;
    if !converged {
        log::warn!("primal solver stopped with gradient norm {grad_norm:e} after {iterations} iterations");
    }
    let primal_obj = p.objective(&x)?;
    Ok(ErmSolution {
        weights: x,
        dual: None,
        primal_obj,
        dual_obj: None,
        duality_gap: None,
        grad_norm: Some(grad_norm),
        epochs: iterations,
        converged,
        trace,
    })
}

fn regularize(lambda: f64, w: &[f64], g: &mut [f64]) -> f64 {
    let mut sq = 0.0;
    for (gi, wi) in g.iter_mut().zip(w) {
        *gi += lambda * wi;
        sq += wi * wi;
    }
    0.5 * lambda * sq
}

fn smoothed_hinge(p: &ErmProblem, mu: f64, w: &[f64], g: &mut [f64]) -> f64 {
    g.iter_mut().for_each(|v| *v = 0.0);
    let n = p.n() as f64;
    let mut loss = 0.0;
    for j in 0..p.n() {
        let y = p.labels[j];
        let t = y * p.data.column_dot(j, w);
        let (value, slope) = if t >= 1.0 {
            (0.0, 0.0)
        } else if t > 1.0 - mu {
            ((1.0 - t).powi(2) / (2.0 * mu), -(1.0 - t) / mu)
        } else {
            (1.0 - t - mu / 2.0, -1.0)
        };
        loss += value;
        if slope != 0.0 {
            p.data.column_axpy(j, slope * y / n, g);
        }
    }
    loss / n + regularize(p.lambda, w, g)
}

fn softmax(p: &ErmProblem, classes: usize, w: &[f64], g: &mut [f64]) -> f64 {
    g.iter_mut().for_each(|v| *v = 0.0);
    let d = p.dim();
    let n = p.n() as f64;
    let scores = class_scores(w, p.data, classes);
    let mut loss = 0.0;
    for j in 0..p.n() {
        let z = scores.column(j);
        let lse = log_sum_exp(z);
        let y = p.labels[j] as usize;
        loss += lse - z[y];
        for c in 0..classes {
            let coef = (z[c] - lse).exp() - if c == y { 1.0 } else { 0.0 };
            if coef != 0.0 {
                p.data.column_axpy(j, coef / n, &mut g[c * d..(c + 1) * d]);
            }
        }
    }
    loss / n + regularize(p.lambda, w, g)
}
