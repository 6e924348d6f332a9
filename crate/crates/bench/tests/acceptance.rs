//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the lines are printed even
//! without `--nocapture`. Pass a substring to run a subset:
//! `cargo test -p nor-bench --test acceptance -- sweep`.

use nalgebra::DMatrix;
use nor_bench::config::DatasetSpec;
use nor_bench::verify::random_hinge_problem;
use nor_bench::{run, verify, ExperimentConfig, ResultRecord, Suite, VerificationReport, VerifyOptions};
use nor_core::datagen::{Decay, SyntheticConfig};
use nor_core::erm::{au_prc, solve_dual, ErmProblem, Loss, ModelMode};
use nor_core::matcore::{fwht, svd_thin, DenseMatrix, DEFAULT_RANK_TOL};
use nor_core::rng::stream;
use nor_core::sketch::SketchKind;
use nor_core::subspace::{excess_risk_rhs, RiskBoundParams};
use rand::Rng;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

const KINDS: [SketchKind; 4] = [SketchKind::RS, SketchKind::RG, SketchKind::SRHT, SketchKind::RH];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn within(elapsed: Duration, limit_secs: u64) -> (bool, String) {
    let ok = elapsed.as_secs_f64() < limit_secs as f64;
    (ok, format!("runtime {:.1}s (limit {limit_secs}s)", elapsed.as_secs_f64()))
}

fn suite_summary(r: &VerificationReport) -> String {
    format!("{} {}/{} freq {:.3} (need {:.3}) worst {:.2e}", r.suite, r.passes, r.trials, r.empirical_frequency, r.required_frequency, r.worst_violation)
}

fn timed_suites(suites: &[Suite], limit_secs: u64) -> Verdict {
    let start = Instant::now();
    let reports: Vec<_> = suites.iter().map(|&s| verify(s, &VerifyOptions::default())).collect();
    let (fast, time) = within(start.elapsed(), limit_secs);
    for r in reports.iter().filter(|r| !r.passed) {
        eprint!("{}", r.to_text());
    }
    let summary: Vec<String> = reports.iter().map(suite_summary).collect();
    verdict(fast && reports.iter().all(|r| r.passed), format!("{}; {time}", summary.join("; ")))
}

fn fast_projector() -> Verdict {
    timed_suites(&[Suite::FastProjector], 120)
}

fn reduced_objective_inequality() -> Verdict {
    timed_suites(&[Suite::Lemma2], 300)
}

fn matrix_approximation_bounds() -> Verdict {
    timed_suites(&[Suite::BoundsRS, Suite::BoundsRG, Suite::BoundsSRHT, Suite::BoundsRH], 600)
}

fn jl_contrast() -> Verdict {
    let r = verify(Suite::JL, &VerifyOptions::default());
    let checks: Vec<String> = r.checks.iter().skip(1).map(|c| format!("{} {:.4}", c.name, c.observed)).collect();
    verdict(r.passed, checks.join("; "))
}

fn value_of(recs: &[ResultRecord], method: &str) -> f64 {
    let r = recs.iter().find(|r| r.method == method).expect("method present");
    r.value.unwrap_or_else(|| panic!("{method} failed: {}", r.status))
}

fn low_rank_parity() -> Verdict {
    let start = Instant::now();
    let (mut nor_ok, mut rp_ok, mut rpdr_ok) = (0, 0, 0);
    let mut rows = Vec::new();
    for seed in 0..10 {
        let cfg = ExperimentConfig {
            dataset: DatasetSpec::Synthetic(SyntheticConfig { seed, ..SyntheticConfig::default() }),
            methods: vec![ModelMode::Full, ModelMode::Nor, ModelMode::Rp, ModelMode::Rpdr],
            operators: vec![SketchKind::RG],
            m_grid: vec![50],
            seeds: vec![0],
            master_seed: seed,
            lambda_grid: vec![1e-3, 1e-2, 1e-1, 1.0],
            record_timings: false,
            ..ExperimentConfig::default()
        };
        let recs = run(&cfg).expect("valid config");
        let (full, nor, rp, rpdr) = (value_of(&recs, "Full"), value_of(&recs, "NOR"), value_of(&recs, "RP"), value_of(&recs, "RPDR"));
        nor_ok += (nor <= full + 0.02) as usize;
        rp_ok += (rp >= nor) as usize;
        rpdr_ok += (rpdr >= nor) as usize;
        rows.push(format!("{full:.3}/{nor:.3}/{rp:.3}/{rpdr:.3}"));
    }
    let (fast, time) = within(start.elapsed(), 600);
    eprintln!("  parity Full/NOR/RP/RPDR per seed: {}", rows.join(" "));
    verdict(
        fast && nor_ok >= 9 && rp_ok >= 8 && rpdr_ok >= 8,
        format!("NOR ≤ Full+0.02 in {nor_ok}/10 (need 9); RP ≥ NOR in {rp_ok}/10, RPDR ≥ NOR in {rpdr_ok}/10 (need 8); {time}"),
    )
}

/// At most one increase, and that one at most `rel` of the preceding value.
fn nonincreasing_with_allowance(means: &[f64], rel: f64) -> bool {
    let rises: Vec<f64> = means.windows(2).filter(|w| w[1] > w[0]).map(|w| (w[1] - w[0]) / w[0]).collect();
    rises.len() <= 1 && rises.iter().all(|&r| r <= rel)
}

fn monotone_sweep() -> Verdict {
    let m_grid = vec![5, 10, 20, 40, 80];
    let cfg = ExperimentConfig {
        dataset: DatasetSpec::Synthetic(SyntheticConfig { decay: Decay::Poly(0.5), ..SyntheticConfig::default() }),
        methods: vec![ModelMode::Nor],
        operators: KINDS.to_vec(),
        m_grid: m_grid.clone(),
        seeds: (0..20).collect(),
        record_timings: false,
        ..ExperimentConfig::default()
    };
    let recs = run(&cfg).expect("valid config");
    if let Some(bad) = recs.iter().find(|r| !r.is_ok()) {
        return verdict(false, format!("cell failed: {}", bad.status));
    }
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in KINDS {
        let mean = |m: usize, f: fn(&ResultRecord) -> f64| {
            let v: Vec<f64> = recs.iter().filter(|r| r.operator.as_deref() == Some(kind.short_name()) && r.m == Some(m)).map(f).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        let errs: Vec<f64> = m_grid.iter().map(|&m| mean(m, |r| r.approx_error.unwrap())).collect();
        let tests: Vec<f64> = m_grid.iter().map(|&m| mean(m, |r| r.value.unwrap())).collect();
        let ok = nonincreasing_with_allowance(&errs, 0.02) && nonincreasing_with_allowance(&tests, 0.02);
        pass &= ok;
        let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(",");
        parts.push(format!("{kind}{} err [{}] test [{}]", if ok { "" } else { " (VIOLATED)" }, fmt(&errs), fmt(&tests)));
    }
    verdict(pass, parts.join("; "))
}

fn solver_contract() -> Verdict {
    let mut rng = stream(0xC0A7);
    let lambdas = [1e-3, 1e-2, 1e-1, 1.0];
    let (mut worst_gap, mut worst_link) = (0.0f64, 0.0f64);
    let mut ok = 0;
    for i in 0..50 {
        let n = rng.random_range(20..=400);
        let d = rng.random_range(2..=80);
        let lambda = lambdas[i % lambdas.len()];
        let (x, y) = random_hinge_problem(rng.random(), n, d);
        let p = ErmProblem::new(&x, &y, Loss::Hinge, lambda).unwrap();
        let sol = solve_dual(&p, 1e-3, 1000, rng.random()).unwrap();
        let alpha = DMatrix::from_column_slice(n, 1, sol.dual.as_ref().unwrap());
        let xd = x.to_dense();
        let link = DMatrix::from_column_slice(d, n, xd.as_slice()) * alpha * (-1.0 / (lambda * n as f64));
        let resid = sol.weights.iter().zip(link.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let gap = sol.duality_gap.unwrap();
        worst_gap = worst_gap.max(gap);
        worst_link = worst_link.max(resid);
        ok += (sol.converged && gap <= 1e-3 && resid <= 1e-10) as usize;
    }
    verdict(ok == 50, format!("{ok}/50 instances; max gap {worst_gap:.2e} (≤ 1e-3), max link residual {worst_link:.2e} (≤ 1e-10)"))
}

fn random_dense(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut rng = stream(seed);
    DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0)).unwrap()
}

/// Enumerates every distinct score as a threshold and sums precision over
/// recall increments.
fn prc_enumeration(scores: &[f64], labels: &[f64]) -> f64 {
    let mut thresholds = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let pos = labels.iter().filter(|&&y| y == 1.0).count() as f64;
    let (mut prev_r, mut area) = (0.0, 0.0);
    for t in thresholds {
        let tp = scores.iter().zip(labels).filter(|(s, y)| **s >= t && **y == 1.0).count() as f64;
        let selected = scores.iter().filter(|s| **s >= t).count() as f64;
        let r = tp / pos;
        area += (r - prev_r) * tp / selected;
        prev_r = r;
    }
    area
}

fn oracle_equivalences() -> Verdict {
    // Singular values against the eigenvalues of the Gram matrix.
    let mut svd_dev = 0.0f64;
    for seed in 0..20 {
        let (r, c) = (5 + (seed as usize * 7) % 60, 3 + (seed as usize * 11) % 40);
        let m = random_dense(r, c, seed);
        let svd = svd_thin(&m, DEFAULT_RANK_TOL).unwrap();
        let a = DMatrix::from_column_slice(r, c, m.as_slice());
        let mut eig: Vec<f64> = (a.transpose() * &a).symmetric_eigen().eigenvalues.iter().map(|l| l.max(0.0).sqrt()).collect();
        eig.sort_by(|x, y| y.total_cmp(x));
        let smax = eig[0];
        for (s, e) in svd.singular_values().iter().zip(&eig) {
            svd_dev = svd_dev.max((s - e).abs() / smax);
        }
    }

    // Fast Walsh-Hadamard against the Sylvester matrix H[i][j] = (−1)^popcount(i & j).
    let mut fwht_dev = 0.0f64;
    for log_n in 0..=10 {
        let n = 1usize << log_n;
        let x: Vec<f64> = random_dense(n, 1, 100 + log_n).into_vec();
        let fast = fwht(&x, false).unwrap();
        let fast_norm = fwht(&x, true).unwrap();
        for i in 0..n {
            let naive: f64 = (0..n).map(|j| if (i & j).count_ones() % 2 == 0 { x[j] } else { -x[j] }).sum();
            fwht_dev = fwht_dev.max((fast[i] - naive).abs()).max((fast_norm[i] - naive / (n as f64).sqrt()).abs());
        }
    }

    // auPRC with heavy score ties.
    let mut prc_dev = 0.0f64;
    let mut rng = stream(0xA0C);
    for _ in 0..200 {
        let n = rng.random_range(2..60);
        let scores: Vec<f64> = (0..n).map(|_| (rng.random_range(-5..5) as f64) / 4.0).collect();
        let mut labels: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
        labels[0] = 1.0;
        labels[1] = -1.0;
        prc_dev = prc_dev.max((au_prc(&scores, &labels).unwrap() - prc_enumeration(&scores, &labels)).abs());
    }

    // Optimized excess-risk bound against a fine log-spaced λ grid.
    let mut risk_dev = 0.0f64;
    for _ in 0..20 {
        let p = RiskBoundParams {
            lipschitz: rng.random_range(0.5..3.0),
            data_radius: rng.random_range(0.5..5.0),
            model_radius: rng.random_range(0.5..5.0),
            lambda: 1.0,
            n: rng.random_range(10..100_000),
            a: rng.random_range(0.1..10.0),
            delta: rng.random_range(1e-4..0.5),
        };
        let err = rng.random_range(0.0..50.0);
        let steps = 100_000;
        let best = (0..=steps)
            .map(|i| 10f64.powf(-8.0 + 12.0 * i as f64 / steps as f64))
            .map(|lambda| excess_risk_rhs(err, &RiskBoundParams { lambda, ..p }, false).unwrap())
            .fold(f64::INFINITY, f64::min);
        let opt = excess_risk_rhs(err, &p, true).unwrap();
        risk_dev = risk_dev.max((best - opt).abs() / opt);
    }

    let pass = svd_dev <= 1e-8 && fwht_dev <= 1e-10 && prc_dev <= 1e-12 && risk_dev <= 1e-3;
    verdict(
        pass,
        format!("svd vs Gram-eigen {svd_dev:.1e} (≤1e-8); fwht {fwht_dev:.1e} (≤1e-10); auPRC {prc_dev:.1e} (≤1e-12); excess risk {:.3}% (≤0.1%)", risk_dev * 100.0),
    )
}

type Criterion = (&'static str, fn() -> Verdict);

const CRITERIA: [Criterion; 8] = [
    ("fast projector equivalence", fast_projector),
    ("reduced objective inequality", reduced_objective_inequality),
    ("matrix approximation bounds", matrix_approximation_bounds),
    ("low-rank NOR parity", low_rank_parity),
    ("monotone m-sweep", monotone_sweep),
    ("JL / non-JL contrast", jl_contrast),
    ("solver contract", solver_contract),
    ("oracle equivalences", oracle_equivalences),
];

fn main() -> ExitCode {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (name, f) in CRITERIA {
        if !filters.is_empty() && !filters.iter().any(|flt| name.contains(flt.as_str())) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            verdict(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        failed += !v.pass as usize;
        println!("{} {name} [{:.1}s]: {}", if v.pass { "PASS" } else { "FAIL" }, start.elapsed().as_secs_f64(), v.detail);
    }
    println!("acceptance: {}/{ran} criteria passed", ran - failed);
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
