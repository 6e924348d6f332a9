//! Regularized empirical risk minimization,
//! `min_w F(w) = (1/n)Σ ℓ(wᵀx_i, y_i) + (λ/2)‖w‖²`, on full, NOR-reduced and
//! randomly projected data.
//!
//! Hinge problems are solved in the dual by stochastic dual coordinate ascent
//! and also in the primal by L-BFGS on a smoothed hinge. The multiclass
//! softmax loss is primal-only. Weights of a `C`-class softmax model are
//! stored class-major: `w[c·dim .. (c+1)·dim]` scores class `c`.

mod dual;
mod lbfgs;
mod metrics;
mod model;
mod primal;

pub use dual::solve_dual;
pub use metrics::{au_prc, error_rate, evaluate, Metric};
pub use model::{
    lemma2_check, nor_projector, train_full, train_nor, train_rp, train_rpdr, Lemma2Report, ModelMeta, ModelMode,
    TrainedModel,
};
pub use primal::{solve_primal, HINGE_SMOOTHING};

use crate::error::{check_dim, Error, Result};
use crate::matcore::{DataMatrix, DenseMatrix};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Loss {
    /// `max(0, 1 − yz)` with labels `±1`.
    Hinge,
    /// Multinomial logistic loss with labels `0..classes`.
    Softmax { classes: usize },
}

impl Loss {
    /// Lipschitz constant `G` of the loss in its score argument.
    pub fn lipschitz(&self) -> f64 {
        match self {
            Loss::Hinge => 1.0,
            Loss::Softmax { .. } => 2.0,
        }
    }

    /// Number of weight blocks of length `dim`.
    pub fn outputs(&self) -> usize {
        match self {
            Loss::Hinge => 1,
            Loss::Softmax { classes } => *classes,
        }
    }

    fn check_labels(&self, labels: &[f64]) -> Result<()> {
        match self {
            Loss::Hinge => {
                if let Some(bad) = labels.iter().find(|&&y| y != 1.0 && y != -1.0) {
                    return Err(Error::InvalidInput(format!("hinge labels must be ±1, found {bad}")));
                }
            }
            Loss::Softmax { classes } => {
                if *classes < 2 {
                    return Err(Error::InvalidInput("softmax needs at least two classes".into()));
                }
                let ok = |y: f64| y >= 0.0 && y.fract() == 0.0 && (y as usize) < *classes;
                if let Some(bad) = labels.iter().find(|&&y| !ok(y)) {
                    return Err(Error::InvalidInput(format!("class label {bad} outside 0..{classes}")));
                }
            }
        }
        Ok(())
    }
}

/// A regularized ERM instance over the columns of `data`.
#[derive(Debug, Clone, Copy)]
pub struct ErmProblem<'a> {
    pub data: &'a DataMatrix,
    pub labels: &'a [f64],
    pub loss: Loss,
    pub lambda: f64,
}

impl<'a> ErmProblem<'a> {
    pub fn new(data: &'a DataMatrix, labels: &'a [f64], loss: Loss, lambda: f64) -> Result<Self> {
        check_dim("ErmProblem labels", data.cols(), labels.len())?;
        if data.cols() == 0 {
            return Err(Error::EmptyDataset("ERM problem without examples".into()));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidInput(format!("lambda must be positive, got {lambda}")));
        }
        loss.check_labels(labels)?;
        Ok(Self { data, labels, loss, lambda })
    }

    pub fn n(&self) -> usize {
        self.data.cols()
    }

    pub fn dim(&self) -> usize {
        self.data.rows()
    }

    pub fn objective(&self, w: &[f64]) -> Result<f64> {
        objective_f(w, self.data, self.labels, self.loss, self.lambda)
    }
}

/// Solver output. `weights` live in the space of the problem's data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErmSolution {
    pub weights: Vec<f64>,
    /// Dual variables with `w = −(1/(λn))Xα` (dual solver only).
    pub dual: Option<Vec<f64>>,
    pub primal_obj: f64,
    pub dual_obj: Option<f64>,
    pub duality_gap: Option<f64>,
    /// Final gradient norm of the minimized objective (primal solver only).
    pub grad_norm: Option<f64>,
    /// Epochs (dual) or iterations (primal) performed.
    pub epochs: usize,
    pub converged: bool,
    /// Objective per epoch (dual: primal objective at each gap check; primal:
    /// minimized objective per accepted step of the final stage).
    pub trace: Vec<f64>,
}

/// Solver settings shared by the training pipelines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub gap_tol: f64,
    pub max_epochs: usize,
    pub primal_tol: f64,
    pub max_iter: usize,
    /// Seed of the dual solver's epoch permutations.
    pub seed: u64,
    pub rank_tol: f64,
    /// Wall-clock timings in model metadata; off gives bit-identical models.
    pub record_timings: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            gap_tol: 1e-3,
            max_epochs: 1000,
            primal_tol: 1e-5,
            max_iter: 5000,
            seed: 0,
            rank_tol: crate::matcore::DEFAULT_RANK_TOL,
            record_timings: true,
        }
    }
}

/// Numerically stable `ln Σ exp(z_c)`.
pub(crate) fn log_sum_exp(z: &[f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Scores `w_cᵀx_j` for every class, as a `classes × n` matrix.
pub(crate) fn class_scores(w: &[f64], x: &DataMatrix, classes: usize) -> DenseMatrix {
    let (d, n) = (x.rows(), x.cols());
    DenseMatrix::from_fn(classes, n, |c, j| x.column_dot(j, &w[c * d..(c + 1) * d])).expect("finite scores")
}

/// `F(w) = (1/n)Σ ℓ(wᵀx_i, y_i) + (λ/2)‖w‖²`, summed exactly in order.
pub fn objective_f(w: &[f64], x: &DataMatrix, labels: &[f64], loss: Loss, lambda: f64) -> Result<f64> {
    let (d, n) = (x.rows(), x.cols());
    check_dim("objective weights", d * loss.outputs(), w.len())?;
    check_dim("objective labels", n, labels.len())?;
    if n == 0 {
        return Err(Error::EmptyDataset("objective over zero examples".into()));
    }
    let reg = 0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>();
    let data_term: f64 = match loss {
        Loss::Hinge => (0..n).map(|j| (1.0 - labels[j] * x.column_dot(j, w)).max(0.0)).sum(),
        Loss::Softmax { classes } => {
            let scores = class_scores(w, x, classes);
            (0..n)
                .map(|j| {
                    let z = scores.column(j);
                    log_sum_exp(z) - z[labels[j] as usize]
                })
                .sum()
        }
    };
    Ok(data_term / n as f64 + reg)
}
