//! Solvers, training pipelines and metrics against independent oracles.

use nor_core::erm::{
    au_prc, error_rate, evaluate, lemma2_check, objective_f, solve_dual, solve_primal, train_full, train_nor, train_rp,
    train_rpdr, ErmProblem, Loss, Metric, ModelMode, SolverConfig, TrainedModel,
};
use nor_core::matcore::{DataMatrix, DenseMatrix, SparseMatrix};
use nor_core::sketch::{Axis, SketchConfig, SketchKind};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_problem(d: usize, n: usize, seed: u64) -> (DataMatrix, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DenseMatrix::from_fn(d, n, |_, _| rng.random_range(-1.0..1.0)).unwrap();
    let w: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut y = x.tr_mul_vec(&w).unwrap();
    for v in y.iter_mut() {
        // Flip a tenth of the labels so the data are not separable.
        let flip = rng.random::<f64>() < 0.1;
        *v = if (*v >= 0.0) != flip { 1.0 } else { -1.0 };
    }
    (DataMatrix::Dense(x), y)
}

fn low_rank_problem(d: usize, n: usize, r: usize, seed: u64) -> (DataMatrix, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = DenseMatrix::from_fn(d, r, |_, _| rng.random_range(-1.0..1.0)).unwrap();
    let c = DenseMatrix::from_fn(r, n, |_, _| rng.random_range(-1.0..1.0)).unwrap();
    let y = (0..n).map(|j| if c.get(0, j) + 0.3 * c.get(1, j) >= 0.0 { 1.0 } else { -1.0 }).collect();
    (DataMatrix::Dense(l.matmul(&c).unwrap()), y)
}

/// Hinge objective written out independently of the library.
fn hinge_objective(w: &[f64], x: &DenseMatrix, y: &[f64], lambda: f64) -> f64 {
    let n = x.cols();
    let mut s = 0.0;
    for j in 0..n {
        let z: f64 = (0..x.rows()).map(|i| w[i] * x.get(i, j)).sum();
        s += (1.0 - y[j] * z).max(0.0);
    }
    s / n as f64 + 0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>()
}

fn tight() -> SolverConfig {
    SolverConfig { gap_tol: 1e-10, max_epochs: 200_000, record_timings: false, ..SolverConfig::default() }
}

#[test]
fn single_point_svm() {
    let x = DataMatrix::Dense(DenseMatrix::from_rows(&[vec![1.0]]).unwrap());
    let p = ErmProblem::new(&x, &[1.0], Loss::Hinge, 1.0).unwrap();
    let sol = solve_dual(&p, 1e-12, 100, 0).unwrap();
    assert!(sol.converged);
    assert!((sol.weights[0] - 1.0).abs() < 1e-12);
    assert!((sol.primal_obj - 0.5).abs() < 1e-12);
    assert!((sol.dual.as_ref().unwrap()[0] + 1.0).abs() < 1e-12);
}

#[test]
fn heavy_regularization_shrinks_weights() {
    let (x, y) = random_problem(5, 40, 3);
    let p = ErmProblem::new(&x, &y, Loss::Hinge, 1e6).unwrap();
    let sol = solve_dual(&p, 1e-3, 1000, 0).unwrap();
    let norm: f64 = sol.weights.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(norm <= 1e-3);
    // Every margin is below one, so every dual variable sits at the bound αy = −1.
    for (a, yi) in sol.dual.unwrap().iter().zip(&y) {
        assert!((a * yi + 1.0).abs() < 1e-12);
    }
}

#[test]
fn dual_matches_grid_oracle_on_tiny_problem() {
    let xd = DenseMatrix::from_rows(&[vec![1.0, 2.0, -1.0, -1.5], vec![0.5, 1.5, -0.5, -2.0]]).unwrap();
    let y = [1.0, 1.0, -1.0, -1.0];
    let x = DataMatrix::Dense(xd.clone());
    let lambda = 0.1;
    // Zooming grid search on the convex objective.
    let (mut cx, mut cy, mut half) = (0.0, 0.0, 4.0);
    let mut best = f64::INFINITY;
    for _ in 0..40 {
        let steps = 40;
        let (mut bx, mut by) = (cx, cy);
        for a in 0..=steps {
            for b in 0..=steps {
                let w = [cx - half + 2.0 * half * a as f64 / steps as f64, cy - half + 2.0 * half * b as f64 / steps as f64];
                let v = hinge_objective(&w, &xd, &y, lambda);
                if v < best {
                    best = v;
                    bx = w[0];
                    by = w[1];
                }
            }
        }
        cx = bx;
        cy = by;
        half *= 0.5;
    }
    let p = ErmProblem::new(&x, &y, Loss::Hinge, lambda).unwrap();
    let sol = solve_dual(&p, 1e-6, 100_000, 1).unwrap();
    assert!((sol.primal_obj - best).abs() <= 1e-4, "{} vs {best}", sol.primal_obj);
    let prim = solve_primal(&p, 1e-8, 10_000).unwrap();
    assert!((prim.primal_obj - best).abs() <= 1e-4, "{} vs {best}", prim.primal_obj);
}

#[test]
fn dual_solver_contract() {
    for seed in 0..50 {
        let (x, y) = random_problem(10 + seed as usize % 20, 50 + 7 * seed as usize, seed);
        let lambda = [0.01, 0.1, 1.0][seed as usize % 3];
        let p = ErmProblem::new(&x, &y, Loss::Hinge, lambda).unwrap();
        let sol = solve_dual(&p, 1e-3, 1000, seed).unwrap();
        assert!(sol.converged);
        let gap = sol.duality_gap.unwrap();
        assert!(gap <= 1e-3 && gap >= -1e-9, "seed {seed}: gap {gap}");
        // Independent recovery w = −(1/(λn))Xα.
        let alpha = sol.dual.as_ref().unwrap();
        let xd = x.to_dense();
        let n = y.len() as f64;
        let link: f64 = (0..xd.rows())
            .map(|i| {
                let r: f64 = (0..xd.cols()).map(|j| xd.get(i, j) * alpha[j]).sum::<f64>() / (lambda * n);
                (sol.weights[i] + r).powi(2)
            })
            .sum::<f64>()
            .sqrt();
        assert!(link <= 1e-10, "seed {seed}: link {link:e}");
        assert!((sol.primal_obj - hinge_objective(&sol.weights, &xd, &y, lambda)).abs() <= 1e-12);
    }
}

#[test]
fn unconverged_dual_is_flagged() {
    let (x, y) = random_problem(20, 200, 9);
    let p = ErmProblem::new(&x, &y, Loss::Hinge, 1e-4).unwrap();
    let sol = solve_dual(&p, 1e-12, 2, 0).unwrap();
    assert!(!sol.converged);
    assert_eq!(sol.epochs, 2);
}

#[test]
fn primal_and_dual_agree() {
    for seed in 0..10 {
        let (x, y) = random_problem(15, 120, 100 + seed);
        let lambda = [0.01, 0.1][seed as usize % 2];
        let p = ErmProblem::new(&x, &y, Loss::Hinge, lambda).unwrap();
        let dual = solve_dual(&p, 1e-3, 1000, seed).unwrap();
        let prim = solve_primal(&p, 1e-5, 20_000).unwrap();
        assert!((dual.primal_obj - prim.primal_obj).abs() <= 2e-3, "{} vs {}", dual.primal_obj, prim.primal_obj);
        assert!(prim.trace.windows(2).all(|w| w[1] < w[0]));
    }
}

#[test]
fn zero_data_gives_zero_weights() {
    let x = DataMatrix::Sparse(SparseMatrix::zeros(4, 6));
    let y = [1.0, -1.0, 1.0, 1.0, -1.0, 1.0];
    let p = ErmProblem::new(&x, &y, Loss::Hinge, 0.5).unwrap();
    assert!(solve_primal(&p, 1e-8, 100).unwrap().weights.iter().all(|v| *v == 0.0));
    assert!(solve_dual(&p, 1e-8, 100, 0).unwrap().weights.iter().all(|v| *v == 0.0));
}

#[test]
fn softmax_with_one_class_predicts_it() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = DataMatrix::Dense(DenseMatrix::from_fn(4, 30, |_, _| rng.random_range(0.1..1.0)).unwrap());
    let y = vec![2.0; 30];
    let model = train_full(&x, &y, Loss::Softmax { classes: 3 }, 0.1, &SolverConfig::default()).unwrap();
    assert!(model.meta.converged);
    assert!(model.predict(&x).unwrap().iter().all(|&c| c == 2.0));
}

#[test]
fn softmax_gradient_descent_is_monotone_and_accurate() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x = DataMatrix::Dense(DenseMatrix::from_fn(5, 80, |_, _| rng.random_range(-1.0..1.0)).unwrap());
    let y: Vec<f64> = (0..80).map(|_| rng.random_range(0..4) as f64).collect();
    let loss = Loss::Softmax { classes: 4 };
    let p = ErmProblem::new(&x, &y, loss, 0.05).unwrap();
    let sol = solve_primal(&p, 1e-5, 5000).unwrap();
    assert!(sol.converged);
    assert!(sol.grad_norm.unwrap() <= 1e-5);
    assert!(sol.trace.windows(2).all(|w| w[1] < w[0]));
    // Optimality: no coordinate perturbation lowers the objective.
    let f0 = objective_f(&sol.weights, &x, &y, loss, 0.05).unwrap();
    for k in 0..sol.weights.len() {
        for h in [1e-3, -1e-3] {
            let mut w = sol.weights.clone();
            w[k] += h;
            assert!(objective_f(&w, &x, &y, loss, 0.05).unwrap() >= f0 - 1e-10);
        }
    }
}

#[test]
fn nor_is_exact_on_low_rank_data() {
    let (x, y) = low_rank_problem(30, 150, 4, 11);
    let lambda = 0.1;
    let cfg = tight();
    let full = train_full(&x, &y, Loss::Hinge, lambda, &cfg).unwrap();
    let omega = SketchConfig::new(SketchKind::RG, 150, 6, 12, Axis::Sample);
    let nor = train_nor(&x, &y, Loss::Hinge, lambda, &omega, &cfg).unwrap();
    assert_eq!(nor.prediction_dim(), 4);
    let f_full = objective_f(&full.weights, &x, &y, Loss::Hinge, lambda).unwrap();
    let f_nor = objective_f(&nor.raw_weights().unwrap(), &x, &y, Loss::Hinge, lambda).unwrap();
    assert!((f_full - f_nor).abs() <= 1e-6, "{f_full} vs {f_nor}");
}

#[test]
fn nor_reduced_objective_equals_raw_objective() {
    let (x, y) = random_problem(25, 120, 13);
    let omega = SketchConfig::new(SketchKind::RH, 120, 10, 14, Axis::Sample);
    let model = train_nor(&x, &y, Loss::Hinge, 0.05, &omega, &SolverConfig::default()).unwrap();
    let xr = model.transform(&x).unwrap();
    let reduced = objective_f(&model.weights, &xr, &y, Loss::Hinge, 0.05).unwrap();
    let raw = objective_f(&model.raw_weights().unwrap(), &x, &y, Loss::Hinge, 0.05).unwrap();
    assert!((reduced - raw).abs() <= 1e-10);
    assert!((reduced - model.meta.primal_obj).abs() <= 1e-10);
}

#[test]
fn lossless_sketches_reproduce_full_training() {
    let (x, y) = random_problem(12, 60, 15);
    let lambda = 0.1;
    let cfg = SolverConfig { record_timings: false, ..SolverConfig::default() };
    let full = train_full(&x, &y, Loss::Hinge, lambda, &cfg).unwrap();
    let f_full = full.meta.primal_obj;

    // All examples sampled: range(Y) = range(X) and the reduced Gram matrix equals XᵀX.
    let omega = SketchConfig::new(SketchKind::RS, 60, 60, 16, Axis::Sample);
    let nor = train_nor(&x, &y, Loss::Hinge, lambda, &omega, &cfg).unwrap();
    assert!((nor.meta.primal_obj - f_full).abs() <= 1e-8);

    // All features sampled without replacement: a coordinate permutation.
    let a = SketchConfig::new(SketchKind::RS, 12, 12, 17, Axis::Feature);
    let rp = train_rp(&x, &y, Loss::Hinge, lambda, &a, &cfg).unwrap();
    assert!((rp.meta.primal_obj - f_full).abs() <= 1e-8);
    let rpdr = train_rpdr(&x, &y, Loss::Hinge, lambda, &a, &cfg).unwrap();
    let diff: f64 = rpdr.weights.iter().zip(&full.weights).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff <= 1e-6);
}

#[test]
fn rpdr_matches_naive_recovery() {
    let (x, y) = random_problem(20, 40, 18);
    let lambda = 0.2;
    let a = SketchConfig::new(SketchKind::RG, 20, 5, 19, Axis::Feature);
    let cfg = SolverConfig::default();
    let model = train_rpdr(&x, &y, Loss::Hinge, lambda, &a, &cfg).unwrap();
    // Solve the reduced dual again and recover by explicit matrix algebra.
    let amat = nor_core::sketch::SketchOperator::from_config(a).unwrap().materialize();
    let xd = x.to_dense();
    let reduced = DataMatrix::Dense(amat.matmul(&xd).unwrap());
    let p = ErmProblem::new(&reduced, &y, Loss::Hinge, lambda).unwrap();
    let alpha = solve_dual(&p, cfg.gap_tol, cfg.max_epochs, cfg.seed).unwrap().dual.unwrap();
    for i in 0..20 {
        let w: f64 = -(0..40).map(|j| xd.get(i, j) * alpha[j]).sum::<f64>() / (lambda * 40.0);
        assert!((w - model.weights[i]).abs() <= 1e-10);
    }
    assert_eq!(model.mode, ModelMode::Rpdr);
    assert_eq!(model.prediction_dim(), 20);
}

#[test]
fn rp_with_uninformative_coordinates_is_at_chance() {
    // The label depends on feature 0 only; sampling features 1..d loses it.
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let (d, n) = (8, 400);
    let xd = DenseMatrix::from_fn(d, n, |_, _| rng.random_range(-1.0..1.0)).unwrap();
    let y: Vec<f64> = (0..n).map(|j| if xd.get(0, j) >= 0.0 { 1.0 } else { -1.0 }).collect();
    let x = DataMatrix::Dense(xd);
    let cfg = SolverConfig::default();
    let train: Vec<usize> = (0..300).collect();
    let xt = x.select_columns(&train);
    let yt: Vec<f64> = train.iter().map(|&j| y[j]).collect();
    let test_idx: Vec<usize> = (300..n).collect();
    let xs = x.select_columns(&test_idx);
    let ys: Vec<f64> = test_idx.iter().map(|&j| y[j]).collect();
    for seed in 0..200 {
        let a = SketchConfig::new(SketchKind::RS, d, 3, seed, Axis::Feature);
        let op = nor_core::sketch::SketchOperator::from_config(a).unwrap();
        if op.sampled_indices().unwrap().contains(&0) {
            continue;
        }
        let model = train_rp(&xt, &yt, Loss::Hinge, 0.01, &a, &cfg).unwrap();
        let err = evaluate(&model, &xs, &ys, Metric::ErrorRate).unwrap();
        assert!((err - 0.5).abs() <= 0.15, "error {err}");
        let full = train_full(&xt, &yt, Loss::Hinge, 0.01, &cfg).unwrap();
        assert!(evaluate(&full, &xs, &ys, Metric::ErrorRate).unwrap() <= 0.1);
        return;
    }
    panic!("no sketch without feature 0");
}

#[test]
fn lemma2_slack_is_nonnegative() {
    let cfg = SolverConfig::default();
    for (seed, lambda) in [(0u64, 0.01), (1, 0.1), (2, 1.0), (3, 1e3)] {
        let (x, y) = random_problem(30, 100, 200 + seed);
        let omega = SketchConfig::new(SketchKind::RG, 100, 10, seed, Axis::Sample);
        let r = lemma2_check(&x, &y, lambda, &omega, &cfg).unwrap();
        assert!(r.slack >= -2.0 * cfg.gap_tol, "λ={lambda}: {r:?}");
        assert!(r.approx_error > 0.0);
    }
    // Lossless sketch: no approximation error, only solver slack.
    let (x, y) = random_problem(10, 40, 210);
    let omega = SketchConfig::new(SketchKind::RS, 40, 40, 1, Axis::Sample);
    let r = lemma2_check(&x, &y, 0.1, &omega, &cfg).unwrap();
    assert!(r.approx_error <= 1e-8);
    assert!(r.slack >= -2.0 * cfg.gap_tol && r.slack <= 2.0 * cfg.gap_tol);
}

/// Exhaustive PR curve: every distinct score as a threshold, counts recomputed
/// from scratch for each.
fn prc_oracle(scores: &[f64], labels: &[f64]) -> f64 {
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let pos = labels.iter().filter(|&&y| y == 1.0).count() as f64;
    let mut prev_r = 0.0;
    let mut area = 0.0;
    for t in thresholds {
        let tp = scores.iter().zip(labels).filter(|(s, y)| **s >= t && **y == 1.0).count() as f64;
        let sel = scores.iter().filter(|s| **s >= t).count() as f64;
        let r = tp / pos;
        area += (r - prev_r) * tp / sel;
        prev_r = r;
    }
    area
}

#[test]
fn auprc_fixture_matches_enumeration() {
    let scores = [0.9, 0.4, 0.4, 0.7, -0.2, 0.1];
    let labels = [1.0, -1.0, 1.0, -1.0, 1.0, -1.0];
    let v = au_prc(&scores, &labels).unwrap();
    assert!((v - prc_oracle(&scores, &labels)).abs() <= 1e-12);
    // By hand: thresholds .9 (P=1,R=1/3), .7 (1/2, 1/3), .4 (1/2, 2/3), .1 (2/5), -.2 (1/2, 1).
    assert!((v - (1.0 / 3.0 + 1.0 / 6.0 + 1.0 / 6.0)).abs() <= 1e-12);
}

#[test]
fn metrics_on_trivial_models() {
    let (x, y) = random_problem(4, 50, 30);
    let mut model = train_full(&x, &y, Loss::Hinge, 0.1, &SolverConfig::default()).unwrap();
    let s = model.decision_values(&x).unwrap();
    let pred: Vec<f64> = s.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
    let flipped: Vec<f64> = pred.iter().map(|v| -v).collect();
    assert_eq!(error_rate(&pred, &pred).unwrap(), 0.0);
    assert_eq!(error_rate(&pred, &flipped).unwrap(), 1.0);
    assert_eq!(au_prc(&s, &pred).unwrap(), 1.0);
    model.weights.iter_mut().for_each(|w| *w = -*w);
    assert_eq!(evaluate(&model, &x, &pred, Metric::ErrorRate).unwrap(), 1.0);
    let one_class = vec![1.0; 50];
    assert!(evaluate(&model, &x, &one_class, Metric::AuPRC).is_err());
}

#[test]
fn models_round_trip_and_are_deterministic() {
    let (x, y) = random_problem(15, 80, 40);
    let cfg = SolverConfig { record_timings: false, ..SolverConfig::default() };
    let omega = SketchConfig::new(SketchKind::SRHT, 80, 8, 41, Axis::Sample);
    let a = SketchConfig::new(SketchKind::RH, 15, 6, 42, Axis::Feature);
    let models = [
        train_full(&x, &y, Loss::Hinge, 0.1, &cfg).unwrap(),
        train_nor(&x, &y, Loss::Hinge, 0.1, &omega, &cfg).unwrap(),
        train_rp(&x, &y, Loss::Hinge, 0.1, &a, &cfg).unwrap(),
        train_rpdr(&x, &y, Loss::Hinge, 0.1, &a, &cfg).unwrap(),
    ];
    let again = train_nor(&x, &y, Loss::Hinge, 0.1, &omega, &cfg).unwrap();
    assert_eq!(models[1], again);
    let dir = tempfile::tempdir().unwrap();
    for m in &models {
        let path = dir.path().join(format!("{}.json", m.mode));
        m.save(&path).unwrap();
        let back = TrainedModel::load(&path).unwrap();
        assert_eq!(&back, m);
        assert_eq!(back.predict(&x).unwrap(), m.predict(&x).unwrap());
    }
    // Scores through the model's own reduction equal raw-space weights.
    for m in &models {
        let s = m.decision_values(&x).unwrap();
        let w = m.raw_weights().unwrap();
        let direct = x.tr_mul_vec(&w).unwrap();
        assert!(s.iter().zip(&direct).all(|(a, b)| (a - b).abs() <= 1e-10));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn auprc_matches_enumeration(seed in any::<u64>(), n in 2usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Coarse scores force ties.
        let scores: Vec<f64> = (0..n).map(|_| (rng.random_range(-5..5) as f64) / 4.0).collect();
        let mut labels: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
        labels[0] = 1.0;
        labels[n - 1] = -1.0;
        let v = au_prc(&scores, &labels).unwrap();
        prop_assert!((v - prc_oracle(&scores, &labels)).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn weak_duality_every_epoch(seed in any::<u64>()) {
        let (x, y) = random_problem(6, 30, seed);
        let p = ErmProblem::new(&x, &y, Loss::Hinge, 0.05).unwrap();
        for epochs in 1..6 {
            let sol = solve_dual(&p, 1e-14, epochs, seed).unwrap();
            prop_assert!(sol.dual_obj.unwrap() <= sol.primal_obj + 1e-9);
        }
    }
}
