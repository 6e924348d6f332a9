use nalgebra::DMatrix;
use nor_bench::config::DatasetSpec;
use nor_bench::record::{append_csv, load_csv, read_csv, to_csv_string};
use nor_bench::runner::{cells, load_dataset};
use nor_bench::verify::{bounds_on, BoundsSetup};
use nor_bench::{run, verify, ExperimentConfig, Suite, VerifyOptions};
use nor_core::datagen::{Decay, SyntheticConfig};
use nor_core::erm::ModelMode;
use nor_core::matcore::{DataMatrix, DenseMatrix};
use nor_core::sketch::{make_operator, Axis, SketchKind};

fn small() -> ExperimentConfig {
    ExperimentConfig {
        dataset: DatasetSpec::Synthetic(SyntheticConfig { d: 30, n: 300, t: 2, decay: Decay::Exp(1.0), seed: 4 }),
        m_grid: vec![10],
        record_timings: false,
        ..ExperimentConfig::default()
    }
}

#[test]
fn full_only_single_seed_gives_one_record() {
    let cfg = ExperimentConfig { methods: vec![ModelMode::Full], operators: vec![SketchKind::RG, SketchKind::RH], m_grid: vec![5, 10], ..small() };
    let recs = run(&cfg).unwrap();
    assert_eq!(recs.len(), 1);
    assert_eq!(recs[0].operator, None);
    assert_eq!(recs[0].m, None);
    assert!(recs[0].is_ok());
}

#[test]
fn grid_is_a_cartesian_product() {
    let cfg = ExperimentConfig {
        methods: vec![ModelMode::Nor, ModelMode::Rp],
        operators: vec![SketchKind::RG, SketchKind::RH],
        m_grid: vec![4, 8, 12],
        seeds: vec![0, 1, 2, 3, 4],
        ..small()
    };
    let recs = run(&cfg).unwrap();
    assert_eq!(recs.len(), 60);
    let with_full = ExperimentConfig { methods: vec![ModelMode::Full, ModelMode::Nor, ModelMode::Rp], ..cfg };
    assert_eq!(cells(&with_full).len(), 65);
    for r in &recs {
        assert!(r.is_ok(), "{}", r.status);
        let v = r.value.unwrap();
        assert!((0.0..=1.0).contains(&v));
        assert!(r.reduce_time_ms >= 0.0 && r.opt_time_ms >= 0.0);
        assert_eq!(r.approx_error.is_some(), r.method == "NOR");
    }
}

#[test]
fn reruns_and_thread_counts_give_identical_csv() {
    let cfg = ExperimentConfig { seeds: vec![0, 1], operators: vec![SketchKind::RS, SketchKind::SRHT], ..small() };
    let a = to_csv_string(&run(&ExperimentConfig { threads: 1, ..cfg.clone() }).unwrap()).unwrap();
    let b = to_csv_string(&run(&ExperimentConfig { threads: 1, ..cfg.clone() }).unwrap()).unwrap();
    let c = to_csv_string(&run(&ExperimentConfig { threads: 3, ..cfg }).unwrap()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn csv_round_trips_and_appends_one_header() {
    let recs = run(&small()).unwrap();
    let text = to_csv_string(&recs).unwrap();
    assert!(text.starts_with("dataset,method,operator,m,seed,lambda,metric,value,approx_error,reduce_time_ms,opt_time_ms,status\n"));
    assert_eq!(read_csv(text.as_bytes()).unwrap(), recs);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    append_csv(&path, &recs).unwrap();
    append_csv(&path, &recs).unwrap();
    let back = load_csv(&path).unwrap();
    assert_eq!(back.len(), 2 * recs.len());
    assert_eq!(&back[..recs.len()], &recs[..]);
    assert_eq!(std::fs::read_to_string(&path).unwrap().matches("dataset,").count(), 1);
}

#[test]
fn failing_cells_become_rows() {
    // Sampling without replacement cannot draw more examples than exist.
    let cfg = ExperimentConfig { methods: vec![ModelMode::Full, ModelMode::Nor], operators: vec![SketchKind::RS], m_grid: vec![10, 5000], ..small() };
    let recs = run(&cfg).unwrap();
    assert_eq!(recs.len(), 3);
    let failed: Vec<_> = recs.iter().filter(|r| !r.is_ok()).collect();
    assert_eq!(failed.len(), 1);
    assert_eq!(failed[0].m, Some(5000));
    assert!(failed[0].status.starts_with("failed: "));
    assert_eq!(failed[0].value, None);
}

#[test]
fn lambda_tuning_picks_from_the_grid() {
    let cfg = ExperimentConfig { methods: vec![ModelMode::Full, ModelMode::Nor], lambda_grid: vec![1e-3, 1e-1, 10.0], ..small() };
    for r in run(&cfg).unwrap() {
        assert!(cfg.lambda_grid.contains(&r.lambda), "{}", r.lambda);
    }
}

fn to_na(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_column_slice(m.rows(), m.cols(), m.as_slice())
}

#[test]
fn recorded_nor_error_matches_independent_recomputation() {
    let cfg = ExperimentConfig { methods: vec![ModelMode::Nor], operators: vec![SketchKind::RG], m_grid: vec![6], ..small() };
    let rec = &run(&cfg).unwrap()[0];
    let cell = cells(&cfg)[0];

    let ds = load_dataset(&cfg.dataset, cfg.loss).unwrap();
    let train: Vec<usize> = ds.train_indices().collect();
    let x = ds.x.select_columns(&train);
    let op = make_operator(SketchKind::RG, x.cols(), 6, cell.derived_seed(cfg.master_seed), Axis::Sample).unwrap();
    let y = to_na(&op.apply_samples(&x).unwrap());
    let svd = y.svd(true, false);
    let smax = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > 1e-10 * smax).collect();
    let u = svd.u.unwrap().select_columns(&keep);
    let xd = to_na(&x.to_dense());
    let resid = &xd - &u * (u.transpose() * &xd);
    let oracle = resid.singular_values().max();
    let got = rec.approx_error.unwrap();
    assert!((got - oracle).abs() <= 1e-6 * oracle.max(1.0), "{got} vs {oracle}");
}

#[test]
fn zero_tail_bounds_are_tight() {
    // Rank-4 data: with k = rank the bound is 0 and every sketch of m ≥ 4
    // Gaussian columns recovers the column space.
    let a = DenseMatrix::from_fn(40, 4, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0).unwrap();
    let b = DenseMatrix::from_fn(4, 300, |i, j| ((i * 5 + j * 13) % 17) as f64 / 8.0 - 1.0).unwrap();
    let x = DataMatrix::Dense(a.matmul(&b).unwrap());
    let setup = BoundsSetup { k: 4, m: Some(12), trials: 20, ..BoundsSetup::standard(SketchKind::RS) };
    let report = bounds_on(&x, &setup, &VerifyOptions::default());
    let bound: f64 = report.parameters.iter().find(|(k, _)| k == "bound").unwrap().1.parse().unwrap();
    assert_eq!(bound, 0.0);
    let rg = BoundsSetup { kind: SketchKind::RG, k: 4, m: Some(12), trials: 20, ..BoundsSetup::standard(SketchKind::RG) };
    let report = bounds_on(&x, &rg, &VerifyOptions::default());
    assert_eq!(report.passes, report.trials, "{}", report.to_text());
    assert!(report.worst_violation <= 1e-9 * 1e3);
}

#[test]
fn quick_suites_pass() {
    let opts = VerifyOptions { trials: Some(12), ..VerifyOptions::default() };
    for s in [Suite::Lemma2, Suite::FastProjector, Suite::BoundsRG, Suite::BoundsRH] {
        let r = verify(s, &opts);
        assert!(r.passed, "{}", r.to_text());
        assert_eq!(r.trials, 12);
    }
    let jl = verify(Suite::JL, &VerifyOptions::default());
    assert!(jl.passed, "{}", jl.to_text());
    let json = serde_json::to_string(&jl).unwrap();
    assert!(json.contains("\"suite\":\"JL\""));
}
