use super::dual::weights_from_dual;
use super::{class_scores, objective_f, solve_dual, solve_primal, ErmProblem, ErmSolution, Loss, SolverConfig};
use crate::error::{check_dim, Error, Result};
use crate::matcore::{DataMatrix, DenseMatrix};
use crate::sketch::{Axis, SketchConfig, SketchKind, SketchOperator};
use crate::subspace::{self, approx_error, projector_direct, projector_from_gram, SubspaceProjector};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelMode {
    /// ERM on the raw features.
    Full,
    /// Non-oblivious reduction: `x̂ = Ûᵀx` with `Û` from a sample sketch.
    Nor,
    /// Random projection: `x̂ = Ax`.
    Rp,
    /// Random projection with dual recovery to the raw feature space.
    Rpdr,
}

impl std::fmt::Display for ModelMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelMode::Full => "Full",
            ModelMode::Nor => "NOR",
            ModelMode::Rp => "RP",
            ModelMode::Rpdr => "RPDR",
        })
    }
}

impl std::str::FromStr for ModelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "FULL" => Ok(ModelMode::Full),
            "NOR" => Ok(ModelMode::Nor),
            "RP" => Ok(ModelMode::Rp),
            "RPDR" => Ok(ModelMode::Rpdr),
            other => Err(Error::InvalidConfig(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub lambda: f64,
    pub m: Option<usize>,
    pub seed: Option<u64>,
    pub kind: Option<SketchKind>,
    /// Sketching, subspace extraction and data reduction.
    pub reduce_time_ms: f64,
    pub opt_time_ms: f64,
    pub converged: bool,
    pub primal_obj: f64,
    pub duality_gap: Option<f64>,
}

/// A trained linear model together with whatever it needs to map raw
/// features into its prediction space.
///
/// | mode | prediction space | extra state |
/// |------|------------------|-------------|
/// | Full, RPDR | `d` | none |
/// | NOR | `m'` | basis `Û ∈ R^{d×m'}` |
/// | RP | `m` | feature-axis sketch config (`A` is rebuilt from its seed) |
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub mode: ModelMode,
    pub loss: Loss,
    pub input_dim: usize,
    pub basis: Option<DenseMatrix>,
    pub sketch: Option<SketchConfig>,
    pub weights: Vec<f64>,
    pub meta: ModelMeta,
}

impl TrainedModel {
    pub fn prediction_dim(&self) -> usize {
        self.weights.len() / self.loss.outputs()
    }

    /// Maps raw test data into the prediction space.
    pub fn transform(&self, x: &DataMatrix) -> Result<DataMatrix> {
        check_dim("model input features", self.input_dim, x.rows())?;
        match self.mode {
            ModelMode::Full | ModelMode::Rpdr => Ok(x.clone()),
            ModelMode::Nor => {
                let basis = self.basis.as_ref().ok_or_else(|| Error::InvalidInput("NOR model without basis".into()))?;
                Ok(DataMatrix::Dense(x.left_tr_mul(basis)?))
            }
            ModelMode::Rp => {
                let cfg = self.sketch.ok_or_else(|| Error::InvalidInput("RP model without sketch".into()))?;
                Ok(DataMatrix::Dense(SketchOperator::from_config(cfg)?.apply_features(x)?))
            }
        }
    }

    /// The NOR subspace, rebuilt from the stored basis.
    pub fn projector(&self) -> Result<Option<SubspaceProjector>> {
        self.basis.clone().map(SubspaceProjector::from_basis).transpose()
    }

    /// Decision values `wᵀx̂_j`, one row per output (one row for hinge).
    pub fn scores(&self, x: &DataMatrix) -> Result<DenseMatrix> {
        let z = self.transform(x)?;
        Ok(class_scores(&self.weights, &z, self.loss.outputs()))
    }

    /// Binary decision values (hinge models only).
    pub fn decision_values(&self, x: &DataMatrix) -> Result<Vec<f64>> {
        if self.loss != Loss::Hinge {
            return Err(Error::InvalidInput("decision values are defined for binary models".into()));
        }
        Ok(self.scores(x)?.into_vec())
    }

    /// Predicted labels: `±1` (a zero score counts as `+1`) or class ids,
    /// ties going to the lowest class.
    pub fn predict(&self, x: &DataMatrix) -> Result<Vec<f64>> {
        let s = self.scores(x)?;
        Ok(match self.loss {
            Loss::Hinge => s.as_slice().iter().map(|&v| if v >= 0.0 { 1.0 } else { -1.0 }).collect(),
            Loss::Softmax { .. } => s
                .columns()
                .map(|z| {
                    let mut best = 0;
                    for (c, v) in z.iter().enumerate() {
                        if *v > z[best] {
                            best = c;
                        }
                    }
                    best as f64
                })
                .collect(),
        })
    }

    /// Equivalent weights on the raw features: `w` for Full and RPDR, `Ûv`
    /// for NOR and `Aᵀv` for RP, per output block.
    pub fn raw_weights(&self) -> Result<Vec<f64>> {
        let k = self.prediction_dim();
        let blocks = self.weights.chunks(k);
        match self.mode {
            ModelMode::Full | ModelMode::Rpdr => Ok(self.weights.clone()),
            ModelMode::Nor => {
                let basis = self.basis.as_ref().ok_or_else(|| Error::InvalidInput("NOR model without basis".into()))?;
                let mut out = Vec::with_capacity(self.input_dim * self.loss.outputs());
                for v in blocks {
                    out.extend(basis.mul_vec(v)?);
                }
                Ok(out)
            }
            ModelMode::Rp => {
                let cfg = self.sketch.ok_or_else(|| Error::InvalidInput("RP model without sketch".into()))?;
                let a = SketchOperator::from_config(cfg)?.materialize();
                let mut out = Vec::with_capacity(self.input_dim * self.loss.outputs());
                for v in blocks {
                    out.extend(a.tr_mul_vec(v)?);
                }
                Ok(out)
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(format!("model serialization: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text).map_err(|e| Error::Io(format!("model deserialization: {e}")))?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn validate(&self) -> Result<()> {
        if self.weights.iter().any(|w| !w.is_finite()) || !self.weights.len().is_multiple_of(self.loss.outputs()) {
            return Err(Error::InvalidInput("model weights malformed".into()));
        }
        let expected = match self.mode {
            ModelMode::Full | ModelMode::Rpdr => self.input_dim,
            ModelMode::Nor => {
                let b = self.basis.as_ref().ok_or_else(|| Error::InvalidInput("NOR model without basis".into()))?;
                check_dim("NOR basis rows", self.input_dim, b.rows())?;
                b.cols()
            }
            ModelMode::Rp => {
                let cfg = self.sketch.ok_or_else(|| Error::InvalidInput("RP model without sketch".into()))?;
                check_dim("RP sketch input", self.input_dim, cfg.in_dim)?;
                cfg.out_dim
            }
        };
        check_dim("model prediction space", expected, self.prediction_dim())
    }
}

fn solve(p: &ErmProblem, solver: &SolverConfig) -> Result<ErmSolution> {
    match p.loss {
        Loss::Hinge => solve_dual(p, solver.gap_tol, solver.max_epochs, solver.seed),
        Loss::Softmax { .. } => solve_primal(p, solver.primal_tol, solver.max_iter),
    }
}

fn elapsed_ms(start: Instant, solver: &SolverConfig) -> f64 {
    if solver.record_timings {
        start.elapsed().as_secs_f64() * 1e3
    } else {
        0.0
    }
}

fn meta(lambda: f64, sol: &ErmSolution, sketch: Option<&SketchConfig>, reduce_ms: f64, opt_ms: f64) -> ModelMeta {
    ModelMeta {
        lambda,
        m: sketch.map(|c| c.out_dim),
        seed: sketch.map(|c| c.seed),
        kind: sketch.map(|c| c.kind),
        reduce_time_ms: reduce_ms,
        opt_time_ms: opt_ms,
        converged: sol.converged,
        primal_obj: sol.primal_obj,
        duality_gap: sol.duality_gap,
    }
}

/// ERM on the raw features.
pub fn train_full(x: &DataMatrix, labels: &[f64], loss: Loss, lambda: f64, solver: &SolverConfig) -> Result<TrainedModel> {
    let p = ErmProblem::new(x, labels, loss, lambda)?;
    let start = Instant::now();
    let sol = solve(&p, solver)?;
    let opt_ms = elapsed_ms(start, solver);
    Ok(TrainedModel {
        mode: ModelMode::Full,
        loss,
        input_dim: x.rows(),
        basis: None,
        sketch: None,
        meta: meta(lambda, &sol, None, 0.0, opt_ms),
        weights: sol.weights,
    })
}

/// Builds the NOR subspace: `Y = XΩ`, then `Û` from the Gram route for
/// sparse data or the thin SVD for dense data.
pub fn nor_projector(x: &DataMatrix, omega: &SketchConfig, rank_tol: f64) -> Result<SubspaceProjector> {
    if omega.axis != Axis::Sample {
        return Err(Error::InvalidConfig("NOR needs a sample-axis sketch".into()));
    }
    check_dim("NOR sketch input (examples)", x.cols(), omega.in_dim)?;
    let op = SketchOperator::from_config(*omega)?;
    let y = op.apply_samples(x)?;
    if x.is_sparse() {
        projector_from_gram(&y, rank_tol)
    } else {
        projector_direct(&y, rank_tol)
    }
}

/// Non-oblivious reduction: sketch, extract `Û`, reduce to `X̂ = ÛᵀX` and
/// solve the reduced problem for `v̂`.
pub fn train_nor(
    x: &DataMatrix,
    labels: &[f64],
    loss: Loss,
    lambda: f64,
    omega: &SketchConfig,
    solver: &SolverConfig,
) -> Result<TrainedModel> {
    ErmProblem::new(x, labels, loss, lambda)?;
    let start = Instant::now();
    let proj = nor_projector(x, omega, solver.rank_tol)?;
    if proj.is_empty() {
        return Err(Error::TrainingFailed("sketch of the data is numerically zero; empty subspace".into()));
    }
    let reduced = DataMatrix::Dense(subspace::reduce(&proj, x)?);
    let reduce_ms = elapsed_ms(start, solver);
    let start = Instant::now();
    let sol = solve(&ErmProblem::new(&reduced, labels, loss, lambda)?, solver)?;
    let opt_ms = elapsed_ms(start, solver);
    Ok(TrainedModel {
        mode: ModelMode::Nor,
        loss,
        input_dim: x.rows(),
        basis: Some(proj.basis().clone()),
        sketch: Some(*omega),
        meta: meta(lambda, &sol, Some(omega), reduce_ms, opt_ms),
        weights: sol.weights,
    })
}

fn project_features(x: &DataMatrix, a: &SketchConfig) -> Result<DataMatrix> {
    if a.axis != Axis::Feature {
        return Err(Error::InvalidConfig("random projection needs a feature-axis sketch".into()));
    }
    check_dim("projection input (features)", x.rows(), a.in_dim)?;
    Ok(DataMatrix::Dense(SketchOperator::from_config(*a)?.apply_features(x)?))
}

/// Oblivious random projection: solve ERM on `X̂ = AX`.
pub fn train_rp(
    x: &DataMatrix,
    labels: &[f64],
    loss: Loss,
    lambda: f64,
    a: &SketchConfig,
    solver: &SolverConfig,
) -> Result<TrainedModel> {
    ErmProblem::new(x, labels, loss, lambda)?;
    let start = Instant::now();
    let reduced = project_features(x, a)?;
    let reduce_ms = elapsed_ms(start, solver);
    let start = Instant::now();
    let sol = solve(&ErmProblem::new(&reduced, labels, loss, lambda)?, solver)?;
    let opt_ms = elapsed_ms(start, solver);
    Ok(TrainedModel {
        mode: ModelMode::Rp,
        loss,
        input_dim: x.rows(),
        basis: None,
        sketch: Some(*a),
        meta: meta(lambda, &sol, Some(a), reduce_ms, opt_ms),
        weights: sol.weights,
    })
}

/// Random projection with dual recovery: solve the dual on `X̂ = AX`, then
/// map `α̂` back through the raw data, `ŵ = −(1/(λn))Xα̂`.
pub fn train_rpdr(
    x: &DataMatrix,
    labels: &[f64],
    loss: Loss,
    lambda: f64,
    a: &SketchConfig,
    solver: &SolverConfig,
) -> Result<TrainedModel> {
    if loss != Loss::Hinge {
        return Err(Error::InvalidInput("dual recovery requires the hinge loss".into()));
    }
    let full = ErmProblem::new(x, labels, loss, lambda)?;
    let start = Instant::now();
    let reduced = project_features(x, a)?;
    let reduce_ms = elapsed_ms(start, solver);
    let start = Instant::now();
    let sol = solve_dual(&ErmProblem::new(&reduced, labels, loss, lambda)?, solver.gap_tol, solver.max_epochs, solver.seed)?;
    let alpha = sol.dual.as_ref().expect("dual solver returns α");
    let weights = weights_from_dual(&full, alpha);
    let opt_ms = elapsed_ms(start, solver);
    let mut m = meta(lambda, &sol, Some(a), reduce_ms, opt_ms);
    m.primal_obj = full.objective(&weights)?;
    Ok(TrainedModel { mode: ModelMode::Rpdr, loss, input_dim: x.rows(), basis: None, sketch: Some(*a), meta: m, weights })
}

/// The quantities of the reduced-versus-full objective inequality
/// `F(Ûv̂) ≤ F(w) + (G²/(2λn))‖X − P_Y X‖₂²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma2Report {
    /// `F(Ûv̂)` on the raw data.
    pub lhs: f64,
    /// `F(w) + (G²/(2λn))‖X − P_Y X‖₂²`.
    pub rhs: f64,
    pub slack: f64,
    pub full_objective: f64,
    pub approx_error: f64,
}

/// Solves the full and NOR-reduced hinge problems to `solver.gap_tol` and
/// evaluates both sides of the inequality. Solutions within the gap of
/// their optima give `slack ≥ −gap_tol`.
pub fn lemma2_check(
    x: &DataMatrix,
    labels: &[f64],
    lambda: f64,
    omega: &SketchConfig,
    solver: &SolverConfig,
) -> Result<Lemma2Report> {
    let loss = Loss::Hinge;
    let p = ErmProblem::new(x, labels, loss, lambda)?;
    let full = solve_dual(&p, solver.gap_tol, solver.max_epochs, solver.seed)?;
    if !full.converged {
        return Err(Error::TrainingFailed("full problem did not reach the gap tolerance".into()));
    }
    let proj = nor_projector(x, omega, solver.rank_tol)?;
    if proj.is_empty() {
        return Err(Error::TrainingFailed("empty subspace".into()));
    }
    let reduced = DataMatrix::Dense(subspace::reduce(&proj, x)?);
    let red = solve_dual(&ErmProblem::new(&reduced, labels, loss, lambda)?, solver.gap_tol, solver.max_epochs, solver.seed)?;
    if !red.converged {
        return Err(Error::TrainingFailed("reduced problem did not reach the gap tolerance".into()));
    }
    let w_hat = proj.lift(&red.weights)?;
    let lhs = objective_f(&w_hat, x, labels, loss, lambda)?;
    let err = approx_error(x, &proj, 1e-10)?.value;
    let g = loss.lipschitz();
    let rhs = full.primal_obj + g * g / (2.0 * lambda * x.cols() as f64) * err * err;
    Ok(Lemma2Report { lhs, rhs, slack: rhs - lhs, full_objective: full.primal_obj, approx_error: err })
}
