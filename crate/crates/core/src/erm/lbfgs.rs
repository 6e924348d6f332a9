//! Limited-memory BFGS with monotone Armijo backtracking.

use crate::matcore::{axpy, dot, norm2};
use std::collections::VecDeque;

const MEMORY: usize = 10;
const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-20;

pub(crate) struct Minimum {
    pub x: Vec<f64>,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective at the start and after every accepted step.
    pub trace: Vec<f64>,
}

/// Minimizes `f` from `x0` until `‖∇f‖ ≤ tol`. `f(x, g)` returns the value
/// and writes the gradient into `g`. Every accepted step strictly lowers `f`.
pub(crate) fn minimize(mut f: impl FnMut(&[f64], &mut [f64]) -> f64, x0: Vec<f64>, tol: f64, max_iter: usize) -> Minimum {
    let dim = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; dim];
    let mut value = f(&x, &mut g);
    let mut trace = vec![value];
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(MEMORY);
    let mut x_new = vec![0.0; dim];
    let mut g_new = vec![0.0; dim];

    for iter in 0..max_iter {
        let gn = norm2(&g);
        if gn <= tol {
            return Minimum { x, grad_norm: gn, iterations: iter, converged: true, trace };
        }
        let mut dir = two_loop(&g, &history);
        let mut slope = dot(&dir, &g);
        if !(slope < 0.0) {
            history.clear();
            dir = g.iter().map(|v| -v).collect();
            slope = -gn * gn;
        }
        let mut step = if history.is_empty() { (1.0 / gn).min(1.0) } else { 1.0 };
        let accepted = loop {
            x_new.copy_from_slice(&x);
            axpy(step, &dir, &mut x_new);
            let v = f(&x_new, &mut g_new);
            if v.is_finite() && v <= value + ARMIJO * step * slope && v < value {
                break Some(v);
            }
            step *= 0.5;
            if step < MIN_STEP {
                break None;
            }
        };
        let Some(v) = accepted else {
            log::debug!("line search stalled at iteration {iter}, gradient norm {gn:e}");
            return Minimum { x, grad_norm: gn, iterations: iter, converged: false, trace };
        };
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        if sy > 1e-12 * norm2(&s) * norm2(&yv) && sy > 0.0 {
            if history.len() == MEMORY {
                history.pop_front();
            }
            history.push_back((s, yv, 1.0 / sy));
        }
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        value = v;
        trace.push(value);
    }
    let gn = norm2(&g);
    Minimum { x, grad_norm: gn, iterations: max_iter, converged: gn <= tol, trace }
}

fn two_loop(g: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        axpy(-a, y, &mut q);
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        axpy(a - b, s, &mut q);
    }
    q
}
