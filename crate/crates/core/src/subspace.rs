//! Data-dependent subspaces from sample sketches, and the error bounds that
//! go with them.
//!
//! Given `Y = XΩ`, the orthonormal basis `Û` of `range(Y)` defines the
//! projector `P_Y = ÛÛᵀ` and the reduced data `X̂ = ÛᵀX`. The basis is computed
//! either from a thin SVD of `Y` or, for sparse data, from the eigenpairs of
//! the small Gram matrix `YᵀY` via `Ûᵀ = Σ̂⁻¹V̂ᵀYᵀ`.

use crate::error::{check_dim, Error, Result};
use crate::matcore::{
    dot, gram, spectral_norm, svd_thin, symmetric_eigen, DataMatrix, DenseMatrix, LinearOperator,
    SparseMatrix, SpectralEstimate,
};
use crate::sketch::{Axis, SketchKind, SketchOperator};
use serde::{Deserialize, Serialize};

/// Eigenvalues of `YᵀY` below this multiple of `m·ε·λ_max` are roundoff.
const GRAM_NOISE_FACTOR: f64 = 64.0;
const APPROX_ERROR_MAX_ITER: usize = 50_000;
const APPROX_ERROR_SEED: u64 = 0x005E_ED0F_E770;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProjectorSource {
    DirectSvd,
    FastGram,
    /// Rebuilt from a stored basis; singular values unknown.
    Basis,
}

/// Orthonormal basis `Û ∈ R^{d×m'}` with the singular values of `Y` it keeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceProjector {
    basis: DenseMatrix,
    sigma: Vec<f64>,
    source: ProjectorSource,
}

impl SubspaceProjector {
    pub fn basis(&self) -> &DenseMatrix {
        &self.basis
    }

    /// Retained singular values of `Y`; empty for [`ProjectorSource::Basis`].
    pub fn singular_values(&self) -> &[f64] {
        &self.sigma
    }

    pub fn source(&self) -> ProjectorSource {
        self.source
    }

    /// Wraps a basis with orthonormal columns (checked to 1e-8).
    pub fn from_basis(basis: DenseMatrix) -> Result<Self> {
        let k = basis.cols();
        let orth = basis.tr_matmul(&basis)?.sub(&DenseMatrix::identity(k))?.frobenius_norm();
        if orth > 1e-8 {
            return Err(Error::InvalidInput(format!("basis columns not orthonormal (error {orth:e})")));
        }
        Ok(Self { basis, sigma: Vec::new(), source: ProjectorSource::Basis })
    }

    /// `m'`, the number of retained directions.
    pub fn rank(&self) -> usize {
        self.basis.cols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.rows()
    }

    /// True when `Y` had no direction above the rank threshold.
    pub fn is_empty(&self) -> bool {
        self.basis.cols() == 0
    }

    /// `ÛÛᵀ` as an explicit `d × d` matrix.
    pub fn projection_matrix(&self) -> DenseMatrix {
        self.basis.matmul(&self.basis.transpose()).expect("inner dimensions agree")
    }

    /// `ÛÛᵀx`.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        let coeffs = self.basis.tr_mul_vec(x)?;
        self.basis.mul_vec(&coeffs)
    }

    /// `Ûv`, lifting a reduced-space vector back to the feature space.
    pub fn lift(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.basis.mul_vec(v)
    }

    fn empty(d: usize, source: ProjectorSource) -> Self {
        log::warn!("sketch has no direction above the rank threshold; projector is empty");
        Self { basis: DenseMatrix::zeros(d, 0), sigma: Vec::new(), source }
    }
}

/// Left singular vectors of `Y` with `σ > rank_tol·σ_max`.
pub fn projector_direct(y: &DenseMatrix, rank_tol: f64) -> Result<SubspaceProjector> {
    if y.rows() == 0 || y.cols() == 0 {
        return Err(Error::InvalidInput("projector_direct: Y has an empty dimension".into()));
    }
    let svd = svd_thin(y, rank_tol)?;
    if svd.rank() == 0 {
        return Ok(SubspaceProjector::empty(y.rows(), ProjectorSource::DirectSvd));
    }
    let (u, sigma, _) = svd.into_parts();
    Ok(SubspaceProjector { basis: u, sigma, source: ProjectorSource::DirectSvd })
}

/// Basis of `range(Y)` from the eigenpairs of `K = YᵀY`:
/// `Σ̂ = diag(√λᵢ)`, `Û = YV̂Σ̂⁻¹`.
///
/// Eigenvalues at or below `max(rank_tol², 64·m·ε)·λ_max` are dropped before
/// inverting. The product is orthonormalized once more by the same Gram
/// route, which removes the `ε·κ²` loss of orthogonality of a single pass.
pub fn projector_from_gram(y: &DenseMatrix, rank_tol: f64) -> Result<SubspaceProjector> {
    if !(0.0..1.0).contains(&rank_tol) {
        return Err(Error::InvalidInput(format!("rank_tol {rank_tol} outside [0, 1)")));
    }
    let d = y.rows();
    let (basis, sigma) = match gram_pass(y, rank_tol)? {
        Some(pass) => pass,
        None => return Ok(SubspaceProjector::empty(d, ProjectorSource::FastGram)),
    };
    let basis = match gram_pass(&basis, 0.0)? {
        Some((refined, s)) if s.len() == sigma.len() => refined,
        _ => basis,
    };
    Ok(SubspaceProjector { basis, sigma, source: ProjectorSource::FastGram })
}

fn gram_pass(y: &DenseMatrix, rank_tol: f64) -> Result<Option<(DenseMatrix, Vec<f64>)>> {
    let k = gram(y)?;
    let eig = symmetric_eigen(&k)?;
    let lambda_max = eig.values.first().copied().unwrap_or(0.0);
    if lambda_max <= 0.0 {
        return Ok(None);
    }
    let noise = GRAM_NOISE_FACTOR * y.cols() as f64 * f64::EPSILON;
    let floor = (rank_tol * rank_tol).max(noise) * lambda_max;
    let keep: Vec<usize> = (0..eig.values.len()).filter(|&i| eig.values[i] > floor).collect();
    let v = eig.vectors.select_columns(&keep);
    let sigma: Vec<f64> = keep.iter().map(|&i| eig.values[i].sqrt()).collect();
    let mut basis = y.matmul(&v)?;
    for (j, s) in sigma.iter().enumerate() {
        basis.column_mut(j).iter_mut().for_each(|x| *x /= s);
    }
    Ok(Some((basis, sigma)))
}

/// Fast projector for sparse data: sketch `Y = XΩ` without densifying `X`,
/// then build the basis through the `m × m` Gram matrix.
pub fn projector_fast_sparse(x: &SparseMatrix, omega: &SketchOperator, rank_tol: f64) -> Result<SubspaceProjector> {
    if omega.axis() != Axis::Sample {
        return Err(Error::InvalidInput("projector_fast_sparse needs a sample-axis operator".into()));
    }
    let y = omega.apply_samples(&DataMatrix::Sparse(x.clone()))?;
    projector_from_gram(&y, rank_tol)
}

/// `X̂ = ÛᵀX ∈ R^{m'×n}`.
pub fn reduce(p: &SubspaceProjector, x: &DataMatrix) -> Result<DenseMatrix> {
    x.left_tr_mul(&p.basis)
}

/// The residual `X − ÛÛᵀX`, applied without forming it.
pub struct ResidualOperator<'a> {
    x: &'a DataMatrix,
    basis: &'a DenseMatrix,
}

impl<'a> ResidualOperator<'a> {
    pub fn new(x: &'a DataMatrix, p: &'a SubspaceProjector) -> Result<Self> {
        check_dim("residual operator rows", x.rows(), p.ambient_dim())?;
        Ok(Self { x, basis: &p.basis })
    }

    fn remove_projection(&self, u: &mut [f64]) {
        for c in self.basis.columns() {
            let coef = dot(c, u);
            for (ui, ci) in u.iter_mut().zip(c) {
                *ui -= coef * ci;
            }
        }
    }
}

impl LinearOperator for ResidualOperator<'_> {
    fn nrows(&self) -> usize {
        self.x.rows()
    }

    fn ncols(&self) -> usize {
        self.x.cols()
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        self.x.apply(v, out);
        self.remove_projection(out);
    }

    fn apply_transpose(&self, u: &[f64], out: &mut [f64]) {
        let mut w = u.to_vec();
        self.remove_projection(&mut w);
        self.x.apply_transpose(&w, out);
    }
}

/// `‖X − ÛÛᵀX‖₂` by matrix-free power iteration to relative tolerance `tol`.
///
/// The basis columns are orthonormal, so removing the projection one column
/// at a time equals applying `I − ÛÛᵀ`. A basis spanning all of `R^d` leaves
/// no residual and returns 0 without iterating.
pub fn approx_error(x: &DataMatrix, p: &SubspaceProjector, tol: f64) -> Result<SpectralEstimate> {
    if tol <= 0.0 {
        return Err(Error::InvalidInput(format!("approx_error tolerance must be positive, got {tol}")));
    }
    let op = ResidualOperator::new(x, p)?;
    if p.rank() == p.ambient_dim() {
        return Ok(SpectralEstimate { value: 0.0, converged: true, iterations: 0 });
    }
    let est = spectral_norm(&op, tol, APPROX_ERROR_MAX_ITER, APPROX_ERROR_SEED);
    if !est.converged {
        log::warn!("approx_error: power iteration stopped after {} iterations", est.iterations);
    }
    Ok(est)
}

/// `μ_k = (n/k)·max_i ‖row_i(V₁)‖²` for `V₁ ∈ R^{n×k}` with orthonormal columns.
pub fn coherence(v1: &DenseMatrix) -> Result<f64> {
    let (n, k) = (v1.rows(), v1.cols());
    if k == 0 || n == 0 {
        return Err(Error::InvalidInput("coherence of an empty basis".into()));
    }
    let orth = v1.tr_matmul(v1)?.sub(&DenseMatrix::identity(k))?.frobenius_norm();
    if orth > 1e-8 {
        return Err(Error::InvalidInput(format!("coherence: columns not orthonormal (error {orth:e})")));
    }
    let max_row = (0..n)
        .map(|i| v1.row(i).iter().map(|v| v * v).sum::<f64>())
        .fold(0.0, f64::max);
    Ok(n as f64 / k as f64 * max_row)
}

/// Spectrum and accuracy parameters shared by the matrix-approximation bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumParams {
    /// `σ₁ ≥ … ≥ σ_r > 0`, the nonzero singular values of `X`.
    pub singular_values: Vec<f64>,
    pub k: usize,
    pub n: usize,
    pub d: usize,
    pub m: usize,
    /// Coherence `μ_k` of the top-`k` right singular vectors.
    pub coherence: f64,
    pub epsilon: f64,
    pub delta: f64,
    /// Hash blocks `s` (random hashing only).
    pub hash_blocks: usize,
}

impl SpectrumParams {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    /// `σ_{k+1}`, zero when `k ≥ r`.
    pub fn sigma_next(&self) -> f64 {
        self.singular_values.get(self.k).copied().unwrap_or(0.0)
    }

    /// `√(Σ_{j>k} σ_j²)`.
    pub fn tail_norm(&self) -> f64 {
        self.singular_values.iter().skip(self.k).map(|s| s * s).sum::<f64>().sqrt()
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if self.n == 0 || self.m == 0 || self.d == 0 {
            return bad("n, d and m must be positive".into());
        }
        if self.singular_values.iter().any(|s| !s.is_finite() || *s < 0.0)
            || self.singular_values.windows(2).any(|w| w[0] < w[1])
        {
            return bad("singular values must be finite, nonnegative and nonincreasing".into());
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon {} outside (0, 1)", self.epsilon));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta {} outside (0, 1)", self.delta));
        }
        let mu_max = self.n as f64 / self.k as f64;
        if self.coherence < 1.0 - 1e-9 || self.coherence > mu_max * (1.0 + 1e-9) {
            return bad(format!("coherence {} outside [1, n/k = {mu_max}]", self.coherence));
        }
        if self.hash_blocks == 0 {
            return bad("hash_blocks must be at least 1".into());
        }
        Ok(())
    }
}

/// A matrix-approximation bound evaluated for one operator kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundEvaluation {
    pub value: f64,
    /// Whether `m` satisfies the requirement under which the bound holds.
    pub m_condition_met: bool,
    /// Smallest `m` allowed by that requirement.
    pub required_m: f64,
    /// Probability with which the bound is guaranteed.
    pub success_probability: f64,
    pub notes: Vec<String>,
}

/// `coef·σ`, with an exactly zero spectrum term staying zero even when the
/// coefficient is infinite.
fn term(coef: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        0.0
    } else {
        coef * sigma
    }
}

/// Upper bound on `‖X − P_Y X‖₂` for a sample sketch of the given kind.
///
/// * RS: `√(1 + n/(εm))·σ_{k+1}` when `m ≥ 2μ_k k ln(k/δ)/(1−ε)²`, w.p. `1−δ`.
/// * RG: `√(1 + (e√(3/ln k) + 2e²/√k)²ε²)·σ_{k+1} + e²√(2/(k ln k))·ε·‖Σ₂‖_F`
///   when `k > 4` and `m ≥ 2ε⁻²k ln k`, w.p. `1 − 2/k − 4k^{−k/ε²}`.
/// * SRHT: `(4 + √(3 ln(n/δ) ln(r/δ)/m))·σ_{k+1} + √(3 ln(r/δ)/m)·‖Σ₂‖_F` when
///   `6C²ε⁻¹(√k + √(8 ln(n/δ)))² ln(k/δ) ≤ m ≤ n` with `C = 1`, `ε < 1/3`,
///   `2 ≤ k ≤ r`, w.p. `1 − 5δ`.
/// * RH: `(1 + √ε)·σ_{k+1} + √(ε/k)·‖Σ₂‖_F` when `m ≥ k/(εδ)` (`s = 1`) or
///   `s ≥ ln³(k/δ)/√ε` and `m ≥ k ln⁶(k/δ)/ε`, w.p. `1 − δ`.
///
/// `‖Σ₂‖_F = √(Σ_{j>k} σ_j²)`.
pub fn bound_rhs(kind: SketchKind, p: &SpectrumParams) -> Result<BoundEvaluation> {
    p.validate()?;
    let mut notes = Vec::new();
    if p.k >= p.rank() {
        notes.push(format!("k = {} ≥ rank {}: σ_(k+1) = 0 and no tail", p.k, p.rank()));
        log::warn!("bound_rhs: k ≥ rank, using σ_(k+1) = 0");
    }
    let (k, n, m) = (p.k as f64, p.n as f64, p.m as f64);
    let (eps, delta) = (p.epsilon, p.delta);
    let r = p.rank().max(1) as f64;
    let sigma = p.sigma_next();
    let tail = p.tail_norm();
    let e = std::f64::consts::E;

    let eval = match kind {
        SketchKind::RandomSampling { .. } => {
            let required = 2.0 * p.coherence / (1.0 - eps).powi(2) * k * (k / delta).ln();
            BoundEvaluation {
                value: term((1.0 + n / (eps * m)).sqrt(), sigma),
                m_condition_met: m >= required,
                required_m: required,
                success_probability: 1.0 - delta,
                notes,
            }
        }
        SketchKind::RandomGaussian => {
            let lnk = k.ln();
            let c_sigma = e * (3.0 / lnk).sqrt() + 2.0 * e * e / k.sqrt();
            let c_tail = e * e * (2.0 / (k * lnk)).sqrt();
            let required = 2.0 * k * lnk / (eps * eps);
            notes.push(
                "constants from the Gaussian range-finder analysis; probability 1 - 2/k - 4k^(-k/eps^2)".into(),
            );
            BoundEvaluation {
                value: term((1.0 + (c_sigma * eps).powi(2)).sqrt(), sigma) + term(c_tail * eps, tail),
                m_condition_met: p.k > 4 && m >= required,
                required_m: required,
                success_probability: 1.0 - 2.0 / k - 4.0 * k.powf(-k / (eps * eps)),
                notes,
            }
        }
        SketchKind::Srht => {
            let log_n = (n / delta).ln();
            let log_r = (r / delta).ln();
            let c = 1.0;
            let required = 6.0 * c * c / eps * (k.sqrt() + (8.0 * log_n).sqrt()).powi(2) * (k / delta).ln();
            notes.push("universal constant C taken as 1; m-condition is advisory".into());
            BoundEvaluation {
                value: term(4.0 + (3.0 * log_n * log_r / m).sqrt(), sigma) + term((3.0 * log_r / m).sqrt(), tail),
                m_condition_met: eps < 1.0 / 3.0 && p.k >= 2 && p.k <= p.rank() && m >= required && m <= n,
                required_m: required,
                success_probability: 1.0 - 5.0 * delta,
                notes,
            }
        }
        SketchKind::RandomHashing { .. } => {
            let s = p.hash_blocks as f64;
            let log_kd = (k / delta).ln();
            let (required, blocks_ok) = if p.hash_blocks == 1 {
                (k / (eps * delta), true)
            } else {
                (k * log_kd.powi(6) / eps, s >= log_kd.powi(3) / eps.sqrt())
            };
            notes.push("big-O constants in the m and s requirements taken as 1".into());
            BoundEvaluation {
                value: term(1.0 + eps.sqrt(), sigma) + term((eps / k).sqrt(), tail),
                m_condition_met: blocks_ok && m >= required,
                required_m: required,
                success_probability: 1.0 - delta,
                notes,
            }
        }
    };
    Ok(eval)
}

/// Constants of the excess-risk bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskBoundParams {
    /// Lipschitz constant `G` of the loss.
    pub lipschitz: f64,
    /// Bound `R` on `‖x‖₂`.
    pub data_radius: f64,
    /// Bound `B` on `‖w∗‖₂`.
    pub model_radius: f64,
    pub lambda: f64,
    pub n: usize,
    /// Free trade-off parameter `a > 0`.
    pub a: f64,
    pub delta: f64,
}

impl RiskBoundParams {
    fn validate(&self) -> Result<()> {
        let vals = [self.lipschitz, self.data_radius, self.model_radius, self.lambda, self.a, self.delta];
        if vals.iter().any(|v| !(v.is_finite() && *v > 0.0)) || self.n == 0 {
            return Err(Error::InvalidInput(format!("risk bound parameters must be positive: {self:?}")));
        }
        Ok(())
    }

    /// `C` in `λB²/2 + C/(λn)`.
    fn inverse_lambda_coefficient(&self, err2norm: f64) -> f64 {
        let g2 = self.lipschitz * self.lipschitz;
        let conf = 32.0 + (1.0 / self.delta).ln();
        g2 * (1.0 + self.a) * err2norm * err2norm / 2.0
            + 8.0 * (1.0 + 1.0 / self.a) * g2 * self.data_radius.powi(2) * conf
    }

    /// The `λ` minimizing the fixed-`λ` bound.
    pub fn optimal_lambda(&self, err2norm: f64) -> f64 {
        let c = self.inverse_lambda_coefficient(err2norm);
        (2.0 * c / (self.n as f64 * self.model_radius.powi(2))).sqrt()
    }
}

/// Excess-risk bound in terms of the approximation error `‖X − P_Y X‖₂`.
///
/// Fixed `λ`:
/// `λB²/2 + G²(1+a)‖X−P_YX‖²/(2λn) + 8(1+1/a)G²R²(32 + ln(1/δ))/(λn)`.
///
/// With `optimize_lambda` the fixed form is minimized over `λ` in closed form,
/// `B·√((G²(1+a)‖X−P_YX‖² + 16(1+1/a)G²R²(32 + ln(1/δ)))/n)`. This never
/// exceeds [`excess_risk_rhs_separated`] and equals it when the approximation
/// error is zero.
pub fn excess_risk_rhs(err2norm: f64, p: &RiskBoundParams, optimize_lambda: bool) -> Result<f64> {
    p.validate()?;
    if !(err2norm.is_finite() && err2norm >= 0.0) {
        return Err(Error::InvalidInput(format!("approximation error {err2norm} must be nonnegative")));
    }
    let n = p.n as f64;
    let c = p.inverse_lambda_coefficient(err2norm);
    if optimize_lambda {
        Ok(p.model_radius * (2.0 * c / n).sqrt())
    } else {
        Ok(p.lambda * p.model_radius.powi(2) / 2.0 + c / (p.lambda * n))
    }
}

/// The optimized bound with the two terms split by `√(u+v) ≤ √u + √v`:
/// `GB√(1+a)‖X−P_YX‖₂/√n + 4GRB√((1+1/a)(32 + ln(1/δ)))/√n`.
pub fn excess_risk_rhs_separated(err2norm: f64, p: &RiskBoundParams) -> Result<f64> {
    p.validate()?;
    let n = p.n as f64;
    let conf = 32.0 + (1.0 / p.delta).ln();
    let gb = p.lipschitz * p.model_radius;
    Ok(gb * (1.0 + p.a).sqrt() * err2norm / n.sqrt()
        + 4.0 * gb * p.data_radius * ((1.0 + 1.0 / p.a) * conf).sqrt() / n.sqrt())
}
