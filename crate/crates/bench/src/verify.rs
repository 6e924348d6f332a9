//! Statistical and deterministic checks of the library's guarantees.
//!
//! Every suite returns a [`VerificationReport`]; failures are report
//! content, never errors.

use crate::runner::{with_pool, APPROX_ERROR_TOL};
use nor_core::datagen::{gen_synthetic, Decay, SyntheticConfig};
use nor_core::erm::{lemma2_check, SolverConfig};
use nor_core::matcore::{svd_thin, DataMatrix, DenseMatrix, SparseMatrix, DEFAULT_RANK_TOL};
use nor_core::rng::{derive_seed, stream, tag_of};
use nor_core::sketch::{jl_distortion, jl_envelope, make_operator, Axis, SketchConfig, SketchKind};
use nor_core::subspace::{
    approx_error, bound_rhs, coherence, projector_direct, projector_fast_sparse, BoundEvaluation, SpectrumParams,
};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::{self, Write as _};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Suite {
    Lemma2,
    BoundsRS,
    BoundsRG,
    BoundsSRHT,
    BoundsRH,
    JL,
    FastProjector,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Lemma2,
        Suite::BoundsRS,
        Suite::BoundsRG,
        Suite::BoundsSRHT,
        Suite::BoundsRH,
        Suite::JL,
        Suite::FastProjector,
    ];
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown suite '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    /// Overrides the suite's default trial count.
    pub trials: Option<usize>,
    pub seed: u64,
    /// Worker threads; 0 lets the pool pick.
    pub threads: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { trials: None, seed: 0x5EED, threads: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub observed: f64,
    pub threshold: f64,
    pub ok: bool,
}

impl Check {
    fn at_least(name: impl Into<String>, observed: f64, threshold: f64) -> Self {
        Self { name: name.into(), observed, threshold, ok: observed >= threshold }
    }

    fn at_most(name: impl Into<String>, observed: f64, threshold: f64) -> Self {
        Self { name: name.into(), observed, threshold, ok: observed <= threshold }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub suite: Suite,
    pub parameters: Vec<(String, String)>,
    pub trials: usize,
    pub passes: usize,
    pub empirical_frequency: f64,
    /// Probability the guarantee is stated with, for randomized statements.
    pub stated_probability: Option<f64>,
    pub required_frequency: f64,
    /// Largest amount by which a trial missed its inequality (0 if none did).
    pub worst_violation: f64,
    pub checks: Vec<Check>,
    /// First few failing trials, for diagnosis.
    pub failures: Vec<String>,
    pub passed: bool,
}

const MAX_LISTED_FAILURES: usize = 10;

impl VerificationReport {
    fn new(suite: Suite, parameters: Vec<(String, String)>, outcomes: &[Outcome], required: f64, stated: Option<f64>) -> Self {
        let trials = outcomes.len();
        let passes = outcomes.iter().filter(|o| o.pass).count();
        let freq = if trials == 0 { 0.0 } else { passes as f64 / trials as f64 };
        let failures = outcomes.iter().filter(|o| !o.pass).take(MAX_LISTED_FAILURES).map(|o| o.detail.clone()).collect();
        Self {
            suite,
            parameters,
            trials,
            passes,
            empirical_frequency: freq,
            stated_probability: stated,
            required_frequency: required,
            worst_violation: outcomes.iter().map(|o| o.violation).fold(0.0, f64::max),
            checks: vec![Check::at_least("pass frequency", freq, required)],
            failures,
            passed: false,
        }
    }

    fn finish(mut self) -> Self {
        self.passed = self.trials > 0 && self.checks.iter().all(|c| c.ok);
        self
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        writeln!(s, "suite {}: {verdict}", self.suite).unwrap();
        if !self.parameters.is_empty() {
            let params: Vec<String> = self.parameters.iter().map(|(k, v)| format!("{k}={v}")).collect();
            writeln!(s, "  parameters: {}", params.join(", ")).unwrap();
        }
        write!(s, "  passes {}/{} (frequency {:.4}", self.passes, self.trials, self.empirical_frequency).unwrap();
        if let Some(p) = self.stated_probability {
            write!(s, "; stated probability {p:.4}").unwrap();
        }
        writeln!(s, "; required {:.4})", self.required_frequency).unwrap();
        writeln!(s, "  worst violation {:e}", self.worst_violation).unwrap();
        for c in &self.checks {
            let mark = if c.ok { "ok" } else { "FAILED" };
            writeln!(s, "  [{mark}] {}: observed {:e}, threshold {:e}", c.name, c.observed, c.threshold).unwrap();
        }
        for f in &self.failures {
            writeln!(s, "  failure: {f}").unwrap();
        }
        s
    }
}

/// Result of a single trial.
#[derive(Debug, Clone)]
struct Outcome {
    pass: bool,
    violation: f64,
    detail: String,
}

impl Outcome {
    fn error(trial: usize, e: impl fmt::Display) -> Self {
        Self { pass: false, violation: f64::INFINITY, detail: format!("trial {trial}: {e}") }
    }
}

fn param(k: &str, v: impl ToString) -> (String, String) {
    (k.to_string(), v.to_string())
}

fn parallel_trials(trials: usize, threads: usize, f: impl Fn(usize) -> Outcome + Sync + Send) -> Vec<Outcome> {
    let run = || (0..trials).into_par_iter().map(&f).collect::<Vec<_>>();
    match with_pool(threads, run) {
        Ok(v) => v,
        Err(e) => (0..trials).map(|t| Outcome::error(t, &e)).collect(),
    }
}

pub fn verify(suite: Suite, opts: &VerifyOptions) -> VerificationReport {
    match suite {
        Suite::Lemma2 => lemma2_suite(opts),
        Suite::BoundsRS => bounds_suite(BoundsSetup::standard(SketchKind::RS), opts),
        Suite::BoundsRG => bounds_suite(BoundsSetup::standard(SketchKind::RG), opts),
        Suite::BoundsSRHT => bounds_suite(BoundsSetup::standard(SketchKind::SRHT), opts),
        Suite::BoundsRH => bounds_suite(BoundsSetup::standard(SketchKind::RH), opts),
        Suite::JL => jl_suite(opts),
        Suite::FastProjector => fast_projector_suite(opts),
    }
}

const KINDS: [SketchKind; 4] = [SketchKind::RS, SketchKind::RG, SketchKind::SRHT, SketchKind::RH];

// ---------------------------------------------------------------- reduced-objective inequality

pub const LEMMA2_TOLERANCE: f64 = 2e-3;
const LEMMA2_LAMBDAS: [f64; 3] = [0.01, 0.1, 1.0];

/// A random hinge problem: Gaussian features scaled to unit expected norm,
/// labels from a random hyperplane with 10% of them flipped.
pub fn random_hinge_problem(seed: u64, n: usize, d: usize) -> (DataMatrix, Vec<f64>) {
    let mut rng = stream(seed);
    let scale = 1.0 / (d as f64).sqrt();
    let x = DenseMatrix::from_fn(d, n, |_, _| scale * Distribution::<f64>::sample(&StandardNormal, &mut rng)).expect("finite");
    let w: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let labels = x
        .tr_mul_vec(&w)
        .expect("shapes agree")
        .into_iter()
        .map(|z| {
            let y = if z >= 0.0 { 1.0 } else { -1.0 };
            if rng.random::<f64>() < 0.1 { -y } else { y }
        })
        .collect();
    (DataMatrix::Dense(x), labels)
}

fn lemma2_suite(opts: &VerifyOptions) -> VerificationReport {
    let trials = opts.trials.unwrap_or(100);
    let solver = SolverConfig { gap_tol: 1e-3, record_timings: false, ..SolverConfig::default() };
    let outcomes = parallel_trials(trials, opts.threads, |t| {
        let seed = derive_seed(opts.seed, &[tag_of("lemma2"), t as u64]);
        let mut rng = stream(seed);
        let n = rng.random_range(50..=500);
        let d = rng.random_range(5..=100);
        let m = rng.random_range(1..=d);
        let kind = KINDS[t % KINDS.len()];
        let lambda = LEMMA2_LAMBDAS[t % LEMMA2_LAMBDAS.len()];
        let (x, y) = random_hinge_problem(rng.random(), n, d);
        let omega = SketchConfig::new(kind, n, m, rng.random(), Axis::Sample);
        let solver = SolverConfig { seed: rng.random(), ..solver };
        match lemma2_check(&x, &y, lambda, &omega, &solver) {
            Ok(r) => Outcome {
                pass: r.slack >= -LEMMA2_TOLERANCE,
                violation: (-r.slack).max(0.0),
                detail: format!("trial {t}: n={n} d={d} m={m} {kind} λ={lambda} slack={:e}", r.slack),
            },
            Err(e) => Outcome::error(t, e),
        }
    });
    let params = vec![param("n", "50..=500"), param("d", "5..=100"), param("lambda", "0.01,0.1,1"), param("tolerance", LEMMA2_TOLERANCE)];
    let mut report = VerificationReport::new(Suite::Lemma2, params, &outcomes, 1.0, None);
    report.checks.push(Check::at_most("worst violation", report.worst_violation, LEMMA2_TOLERANCE));
    report.finish()
}

// ---------------------------------------------------------------- bounds

/// One matrix-approximation bound experiment: repeated sample sketches of a
/// fixed matrix, each compared against the bound for its kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsSetup {
    pub kind: SketchKind,
    pub k: usize,
    /// Sketch size; `None` takes the smallest `m` meeting the bound's condition.
    pub m: Option<usize>,
    pub epsilon: f64,
    pub delta: f64,
    pub trials: usize,
    /// Allowed shortfall of the empirical success frequency below the
    /// stated probability (Monte-Carlo slack).
    pub margin: f64,
    pub data: SyntheticConfig,
}

impl BoundsSetup {
    /// Exp-decay data with `d = 200`; `n = 2000` except for SRHT, whose size
    /// condition needs `n ≥ m ≈ 6500`.
    pub fn standard(kind: SketchKind) -> Self {
        let data = SyntheticConfig { d: 200, n: 2000, t: 0, decay: Decay::Exp(1.0), seed: 2 };
        let base = Self { kind, k: 1, m: None, epsilon: 0.5, delta: 0.1, trials: 200, margin: 0.05, data };
        match kind {
            SketchKind::RandomSampling { .. } => base,
            SketchKind::RandomGaussian => Self { k: 5, ..base },
            SketchKind::Srht => Self { k: 2, epsilon: 0.33, data: SyntheticConfig { n: 8192, ..data }, ..base },
            SketchKind::RandomHashing { .. } => Self { k: 2, ..base },
        }
    }
}

/// Residuals are measured in floating point; an error within `1e-9·σ₁` of
/// the bound counts as meeting it.
pub const BOUND_ROUNDOFF: f64 = 1e-9;

fn spectrum_params(x: &DataMatrix, setup: &BoundsSetup) -> nor_core::Result<SpectrumParams> {
    let svd = svd_thin(&x.to_dense(), DEFAULT_RANK_TOL)?;
    let k_basis = setup.k.min(svd.rank());
    if k_basis == 0 {
        return Err(nor_core::Error::InvalidInput("data matrix is zero".into()));
    }
    let mu = coherence(&svd.v().leading_columns(k_basis))? * k_basis as f64 / setup.k as f64;
    Ok(SpectrumParams {
        singular_values: svd.singular_values().to_vec(),
        k: setup.k,
        n: x.cols(),
        d: x.rows(),
        m: setup.m.unwrap_or(1),
        coherence: mu.max(1.0),
        epsilon: setup.epsilon,
        delta: setup.delta,
        hash_blocks: setup.kind.hash_blocks(),
    })
}

fn evaluate_bound(x: &DataMatrix, setup: &BoundsSetup) -> nor_core::Result<(SpectrumParams, BoundEvaluation)> {
    let mut params = spectrum_params(x, setup)?;
    if setup.m.is_none() {
        params.m = bound_rhs(setup.kind, &params)?.required_m.ceil().max(1.0) as usize;
    }
    let eval = bound_rhs(setup.kind, &params)?;
    Ok((params, eval))
}

/// Runs a bounds experiment on a caller-supplied matrix.
pub fn bounds_on(x: &DataMatrix, setup: &BoundsSetup, opts: &VerifyOptions) -> VerificationReport {
    let suite = bounds_suite_of(setup.kind);
    let mut params = vec![
        param("kind", setup.kind),
        param("d", x.rows()),
        param("n", x.cols()),
        param("k", setup.k),
        param("epsilon", setup.epsilon),
        param("delta", setup.delta),
    ];
    let (sp, eval) = match evaluate_bound(x, setup) {
        Ok(v) => v,
        Err(e) => {
            let trials = opts.trials.unwrap_or(setup.trials);
            let outcomes: Vec<Outcome> = (0..trials.max(1)).map(|t| Outcome::error(t, &e)).collect();
            return VerificationReport::new(suite, params, &outcomes, 1.0, None).finish();
        }
    };
    let trials = opts.trials.unwrap_or(setup.trials);
    let allowance = BOUND_ROUNDOFF * sp.singular_values.first().copied().unwrap_or(0.0);
    let outcomes = parallel_trials(trials, opts.threads, |t| {
        let seed = derive_seed(opts.seed, &[tag_of("bounds"), tag_of(setup.kind.short_name()), t as u64]);
        let measured = make_operator(setup.kind, sp.n, sp.m, seed, Axis::Sample)
            .and_then(|op| op.apply_samples(x))
            .and_then(|y| projector_direct(&y, DEFAULT_RANK_TOL))
            .and_then(|p| approx_error(x, &p, APPROX_ERROR_TOL));
        match measured {
            Ok(err) => Outcome {
                pass: err.value <= eval.value + allowance,
                violation: (err.value - eval.value).max(0.0),
                detail: format!("trial {t}: error {:e} > bound {:e}", err.value, eval.value),
            },
            Err(e) => Outcome::error(t, e),
        }
    });
    params.extend([
        param("m", sp.m),
        param("required_m", format!("{:.1}", eval.required_m)),
        param("coherence", format!("{:.4}", sp.coherence)),
        param("sigma_k+1", format!("{:e}", sp.sigma_next())),
        param("bound", format!("{:e}", eval.value)),
    ]);
    let p = eval.success_probability;
    let mut report = VerificationReport::new(suite, params, &outcomes, p - setup.margin, Some(p));
    report.checks.push(Check {
        name: "m-condition of the bound".into(),
        observed: sp.m as f64,
        threshold: eval.required_m,
        ok: eval.m_condition_met,
    });
    report.finish()
}

fn bounds_suite_of(kind: SketchKind) -> Suite {
    match kind {
        SketchKind::RandomSampling { .. } => Suite::BoundsRS,
        SketchKind::RandomGaussian => Suite::BoundsRG,
        SketchKind::Srht => Suite::BoundsSRHT,
        SketchKind::RandomHashing { .. } => Suite::BoundsRH,
    }
}

fn bounds_suite(setup: BoundsSetup, opts: &VerifyOptions) -> VerificationReport {
    match gen_synthetic(&setup.data) {
        Ok(ds) => bounds_on(&ds.x, &setup, opts),
        Err(e) => {
            let outcomes = [Outcome::error(0, e)];
            VerificationReport::new(bounds_suite_of(setup.kind), Vec::new(), &outcomes, 1.0, None).finish()
        }
    }
}

// ---------------------------------------------------------------- JL

pub const JL_DIM: usize = 512;
pub const JL_M: usize = 256;
pub const JL_C: f64 = 4.0;
pub const JL_DELTA: f64 = 0.01;

fn unit_gaussian_vectors(count: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = stream(seed);
    (0..count)
        .map(|_| {
            let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / norm).collect()
        })
        .collect()
}

/// `e_{i mod dim}` for `i < count`: the inputs on which coordinate sampling
/// either drops a vector entirely or rescales it by `√(d/m)`.
pub fn one_sparse_vectors(count: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|i| {
            let mut v = vec![0.0; dim];
            v[i % dim] = 1.0;
            v
        })
        .collect()
}

fn jl_suite(opts: &VerifyOptions) -> VerificationReport {
    let count = opts.trials.unwrap_or(1000);
    let envelope = jl_envelope(JL_C, JL_DELTA, JL_M);
    let dense = unit_gaussian_vectors(count, JL_DIM, derive_seed(opts.seed, &[tag_of("jl-vectors")]));
    let sparse = one_sparse_vectors(count, JL_DIM);
    let mut outcomes = Vec::new();
    let mut checks = Vec::new();
    let mut params = vec![param("d", JL_DIM), param("m", JL_M), param("c", JL_C), param("delta", JL_DELTA), param("envelope", format!("{envelope:.4}"))];
    for kind in [SketchKind::RG, SketchKind::RH] {
        let seed = derive_seed(opts.seed, &[tag_of("jl"), tag_of(kind.short_name())]);
        match make_operator(kind, JL_DIM, JL_M, seed, Axis::Feature).and_then(|a| jl_distortion(&a, &dense)) {
            Ok(r) => {
                outcomes.extend(r.distortions.iter().enumerate().map(|(i, &dist)| Outcome {
                    pass: dist <= envelope,
                    violation: (dist - envelope).max(0.0),
                    detail: format!("{kind} vector {i}: distortion {dist:.4}"),
                }));
                params.push(param(&format!("{kind} q99"), format!("{:.4}", r.quantile(0.99))));
                checks.push(Check::at_least(format!("{kind} fraction within envelope"), r.fraction_within(envelope), 1.0 - JL_DELTA));
            }
            Err(e) => {
                outcomes.push(Outcome::error(0, &e));
                checks.push(Check::at_least(format!("{kind}: {e}"), 0.0, 1.0));
            }
        }
    }
    let seed = derive_seed(opts.seed, &[tag_of("jl"), tag_of("RS")]);
    match make_operator(SketchKind::RS, JL_DIM, JL_M, seed, Axis::Feature).and_then(|a| jl_distortion(&a, &sparse)) {
        Ok(r) => {
            params.push(param("RS max distortion", format!("{:.4}", r.max())));
            // Coordinate sampling is not a JL map: on 1-sparse inputs it must miss the envelope.
            checks.push(Check::at_most("RS fraction within envelope (1-sparse)", r.fraction_within(envelope), 1.0 - JL_DELTA - f64::EPSILON));
            checks.push(Check::at_least("RS max distortion (1-sparse)", r.max(), 1.0 - 1e-12));
        }
        Err(e) => checks.push(Check::at_least(format!("RS: {e}"), 0.0, 1.0)),
    }
    let mut report = VerificationReport::new(Suite::JL, params, &outcomes, 1.0 - JL_DELTA, Some(1.0 - JL_DELTA));
    report.checks.extend(checks);
    report.finish()
}

// ---------------------------------------------------------------- fast projector

pub const FAST_PROJECTOR_TOL: f64 = 1e-8;

/// Sparse Gaussian matrix with i.i.d. Bernoulli(`density`) support.
pub fn random_sparse(d: usize, n: usize, density: f64, seed: u64) -> SparseMatrix {
    let mut rng = stream(seed);
    let columns = (0..n)
        .map(|_| {
            (0..d)
                .filter_map(|i| (rng.random::<f64>() < density).then(|| (i, StandardNormal.sample(&mut rng))))
                .collect()
        })
        .collect();
    SparseMatrix::from_columns(d, columns).expect("indices are in range and increasing")
}

fn fast_projector_suite(opts: &VerifyOptions) -> VerificationReport {
    let trials = opts.trials.unwrap_or(100);
    let outcomes = parallel_trials(trials, opts.threads, |t| {
        let seed = derive_seed(opts.seed, &[tag_of("fast-projector"), t as u64]);
        let mut rng = stream(seed);
        let d = rng.random_range(20..=500);
        let n = rng.random_range(100..=2000);
        let density = rng.random_range(0.005..=0.05);
        let m = rng.random_range(1..=50);
        let kind = KINDS[t % KINDS.len()];
        let x = random_sparse(d, n, density, rng.random());
        let compared = make_operator(kind, n, m, rng.random(), Axis::Sample).and_then(|op| {
            let fast = projector_fast_sparse(&x, &op, DEFAULT_RANK_TOL)?;
            let direct = projector_direct(&op.apply_samples(&DataMatrix::Sparse(x.clone()))?, DEFAULT_RANK_TOL)?;
            let diff = fast.projection_matrix().sub(&direct.projection_matrix())?.frobenius_norm();
            Ok((diff, fast.rank(), direct.rank()))
        });
        match compared {
            Ok((diff, rf, rd)) => Outcome {
                pass: diff <= FAST_PROJECTOR_TOL,
                violation: diff,
                detail: format!("trial {t}: d={d} n={n} density={density:.4} m={m} {kind} ranks {rf}/{rd} diff {diff:e}"),
            },
            Err(e) => Outcome::error(t, e),
        }
    });
    let params = vec![param("d", "20..=500"), param("n", "100..=2000"), param("density", "0.005..=0.05"), param("m", "1..=50")];
    let mut report = VerificationReport::new(Suite::FastProjector, params, &outcomes, 1.0, None);
    report.checks.push(Check::at_most("max ‖P_fast − P_direct‖_F", report.worst_violation, FAST_PROJECTOR_TOL));
    report.finish()
}
