use super::{ErmProblem, ErmSolution, Loss};
use crate::error::{Error, Result};
use crate::rng;
use rand::seq::SliceRandom;

/// Stochastic dual coordinate ascent for the hinge loss.
///
/// Maximizes `D(α) = −(1/n)Σ ℓ*(α_i) − (λ/2)‖w(α)‖²` with
/// `w(α) = −(1/(λn))Xα`, `ℓ*(α) = αy` and `αy ∈ [−1, 0]`. Coordinates are
/// visited in a fresh seeded permutation every epoch and updated in closed
/// form. After each epoch `w` is rebuilt from `α` so the reported primal
/// point satisfies the link exactly, then the duality gap is checked.
///
/// Reaching `max_epochs` returns the last iterate with `converged = false`.
pub fn solve_dual(p: &ErmProblem, gap_tol: f64, max_epochs: usize, seed: u64) -> Result<ErmSolution> {
    if p.loss != Loss::Hinge {
        return Err(Error::InvalidInput("the dual solver supports the hinge loss only".into()));
    }
    if !(gap_tol > 0.0) {
        return Err(Error::InvalidInput(format!("gap_tol must be positive, got {gap_tol}")));
    }
    let (x, y) = (p.data, p.labels);
    let (d, n) = (p.dim(), p.n());
    let lambda_n = p.lambda * n as f64;
    let norms: Vec<f64> = (0..n).map(|j| x.column_norm_sq(j)).collect();

    // β_i = −α_i y_i ∈ [0, 1], so w = (1/(λn))Σ β_i y_i x_i.
    let mut beta = vec![0.0; n];
    let mut w = vec![0.0; d];
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rng::stream(seed);
    let mut trace = Vec::new();
    let mut last = (f64::INFINITY, f64::NEG_INFINITY);

    for epoch in 1..=max_epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let target = if norms[i] == 0.0 {
                1.0
            } else {
                let margin = y[i] * x.column_dot(i, &w);
                (beta[i] + (1.0 - margin) * lambda_n / norms[i]).clamp(0.0, 1.0)
            };
            let delta = target - beta[i];
            if delta != 0.0 {
                x.column_axpy(i, delta * y[i] / lambda_n, &mut w);
                beta[i] = target;
            }
        }
        let alpha = dual_from_beta(&beta, y);
        w = weights_from_dual(p, &alpha);
        let (primal, dual) = objectives(p, &w, &beta)?;
        trace.push(primal);
        last = (primal, dual);
        let gap = primal - dual;
        if gap <= gap_tol {
            log::debug!("dual solver converged after {epoch} epochs, gap {gap:e}");
            return Ok(finish(w, alpha, primal, dual, epoch, true, trace));
        }
    }
    log::warn!("dual solver hit max_epochs = {max_epochs} with gap {:e}", last.0 - last.1);
    let alpha = dual_from_beta(&beta, y);
    let w = weights_from_dual(p, &alpha);
    let (primal, dual) = objectives(p, &w, &beta)?;
    Ok(finish(w, alpha, primal, dual, max_epochs, false, trace))
}

fn dual_from_beta(beta: &[f64], y: &[f64]) -> Vec<f64> {
    beta.iter().zip(y).map(|(b, yi)| -b * yi).collect()
}

/// `w = −(1/(λn))Xα`.
pub(crate) fn weights_from_dual(p: &ErmProblem, alpha: &[f64]) -> Vec<f64> {
    let scale = -1.0 / (p.lambda * p.n() as f64);
    let mut w = vec![0.0; p.dim()];
    for (j, a) in alpha.iter().enumerate() {
        if *a != 0.0 {
            p.data.column_axpy(j, scale * a, &mut w);
        }
    }
    w
}

fn objectives(p: &ErmProblem, w: &[f64], beta: &[f64]) -> Result<(f64, f64)> {
    let primal = p.objective(w)?;
    let reg = 0.5 * p.lambda * w.iter().map(|v| v * v).sum::<f64>();
    let dual = beta.iter().sum::<f64>() / p.n() as f64 - reg;
    Ok((primal, dual))
}

fn finish(w: Vec<f64>, alpha: Vec<f64>, primal: f64, dual: f64, epochs: usize, converged: bool, trace: Vec<f64>) -> ErmSolution {
    ErmSolution {
        weights: w,
        dual: Some(alpha),
        primal_obj: primal,
        dual_obj: Some(dual),
        duality_gap: Some(primal - dual),
        grad_norm: None,
        epochs,
        converged,
        trace,
    }
}
