//! Executes the method × operator × m × seed grid of an experiment.

use crate::config::{DatasetSpec, ExperimentConfig};
use crate::error::Result;
use crate::record::{ResultRecord, STATUS_OK};
use nor_core::datagen::{gen_synthetic, load_libsvm, train_size, Dataset};
use nor_core::erm::{evaluate, train_full, train_nor, train_rp, train_rpdr, Loss, Metric, ModelMode, SolverConfig, TrainedModel};
use nor_core::matcore::DataMatrix;
use nor_core::rng::{derive_seed, tag_of};
use nor_core::sketch::{Axis, SketchConfig, SketchKind};
use nor_core::subspace::approx_error;
use rayon::prelude::*;

/// Power-iteration tolerance for the recorded NOR approximation error.
pub const APPROX_ERROR_TOL: f64 = 1e-8;

/// One job of the grid. Full cells carry no operator and no `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub method: ModelMode,
    pub operator: Option<SketchKind>,
    pub m: Option<usize>,
    pub seed: u64,
}

fn method_rank(m: ModelMode) -> u8 {
    match m {
        ModelMode::Full => 0,
        ModelMode::Nor => 1,
        ModelMode::Rp => 2,
        ModelMode::Rpdr => 3,
    }
}

fn operator_rank(k: Option<SketchKind>) -> (u8, usize) {
    match k {
        None => (0, 0),
        Some(SketchKind::RandomSampling { with_replacement }) => (1, with_replacement as usize),
        Some(SketchKind::RandomGaussian) => (2, 0),
        Some(SketchKind::Srht) => (3, 0),
        Some(SketchKind::RandomHashing { blocks }) => (4, blocks),
    }
}

impl Cell {
    fn sort_key(&self) -> (u8, (u8, usize), usize, u64) {
        (method_rank(self.method), operator_rank(self.operator), self.m.unwrap_or(0), self.seed)
    }

    /// `derive_seed(master, [method, operator, m, replicate])`. The dataset is
    /// shared by all cells, so paired comparisons differ only in this draw.
    pub fn derived_seed(&self, master: u64) -> u64 {
        let op = self.operator.map(|k| k.to_string()).unwrap_or_default();
        derive_seed(master, &[tag_of(&self.method.to_string()), tag_of(&op), self.m.unwrap_or(0) as u64, self.seed])
    }
}

/// The grid in sorted order: method, operator, m, seed.
pub fn cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    for &method in &cfg.methods {
        for &seed in &cfg.seeds {
            if method == ModelMode::Full {
                out.push(Cell { method, operator: None, m: None, seed });
                continue;
            }
            for &op in &cfg.operators {
                for &m in &cfg.m_grid {
                    out.push(Cell { method, operator: Some(op), m: Some(m), seed });
                }
            }
        }
    }
    out.sort_by_key(Cell::sort_key);
    out.dedup();
    out
}

pub fn load_dataset(spec: &DatasetSpec, loss: Loss) -> Result<Dataset> {
    let mut ds = match spec {
        DatasetSpec::Synthetic(c) => gen_synthetic(c)?,
        DatasetSpec::Libsvm { path, n_features } => load_libsvm(path, *n_features)?,
    };
    let pm_one = ds.labels.iter().all(|&y| y == 1.0 || y == -1.0);
    match loss {
        Loss::Hinge if !pm_one => ds.binarize_labels()?,
        Loss::Softmax { classes: 2 } if pm_one => ds.labels.iter_mut().for_each(|y| *y = (*y > 0.0) as u8 as f64),
        _ => {}
    }
    Ok(ds)
}

struct Split {
    x_train: DataMatrix,
    y_train: Vec<f64>,
    x_test: DataMatrix,
    y_test: Vec<f64>,
}

fn split(x: DataMatrix, y: Vec<f64>, train_len: usize) -> Split {
    let n = x.cols();
    let tr: Vec<usize> = (0..train_len).collect();
    let te: Vec<usize> = (train_len..n).collect();
    Split { x_train: x.select_columns(&tr), y_train: y[..train_len].to_vec(), x_test: x.select_columns(&te), y_test: y[train_len..].to_vec() }
}

fn train_cell(cell: &Cell, x: &DataMatrix, y: &[f64], loss: Loss, lambda: f64, seed: u64, solver: &SolverConfig) -> nor_core::Result<TrainedModel> {
    let (kind, m) = (cell.operator, cell.m);
    let sketch = |in_dim: usize, axis: Axis| SketchConfig::new(kind.expect("reduced cell"), in_dim, m.expect("reduced cell"), seed, axis);
    match cell.method {
        ModelMode::Full => train_full(x, y, loss, lambda, solver),
        ModelMode::Nor => train_nor(x, y, loss, lambda, &sketch(x.cols(), Axis::Sample), solver),
        ModelMode::Rp => train_rp(x, y, loss, lambda, &sketch(x.rows(), Axis::Feature), solver),
        ModelMode::Rpdr => train_rpdr(x, y, loss, lambda, &sketch(x.rows(), Axis::Feature), solver),
    }
}

fn better(metric: Metric, a: f64, b: f64) -> bool {
    match metric {
        Metric::ErrorRate => a < b,
        Metric::AuPRC => a > b,
    }
}

/// Picks λ from the grid by training on the first 90% of the training data
/// and scoring the remaining 10%. Ties keep the earlier grid entry.
fn tune_lambda(cfg: &ExperimentConfig, cell: &Cell, data: &Split, seed: u64, solver: &SolverConfig) -> nor_core::Result<f64> {
    let inner = split(data.x_train.clone(), data.y_train.clone(), train_size(data.y_train.len()));
    let mut best: Option<(f64, f64)> = None;
    let mut last_err = None;
    for &lambda in &cfg.lambda_grid {
        let scored = train_cell(cell, &inner.x_train, &inner.y_train, cfg.loss, lambda, seed, solver)
            .and_then(|model| evaluate(&model, &inner.x_test, &inner.y_test, cfg.metric));
        match scored {
            Ok(score) if best.is_none_or(|(_, b)| better(cfg.metric, score, b)) => best = Some((lambda, score)),
            Ok(_) => {}
            Err(e) => {
                log::warn!("λ = {lambda} failed during tuning: {e}");
                last_err = Some(e);
            }
        }
    }
    match (best, last_err) {
        (Some((lambda, _)), _) => Ok(lambda),
        (None, Some(e)) => Err(e),
        (None, None) => unreachable!("lambda grid is nonempty"),
    }
}

fn run_cell(cfg: &ExperimentConfig, name: &str, cell: &Cell, data: &Split) -> ResultRecord {
    let seed = cell.derived_seed(cfg.master_seed);
    let solver = SolverConfig {
        gap_tol: cfg.gap_tol,
        seed: derive_seed(seed, &[tag_of("solver")]),
        record_timings: cfg.record_timings,
        ..SolverConfig::default()
    };
    let mut record = ResultRecord {
        dataset: name.to_string(),
        method: cell.method.to_string(),
        operator: cell.operator.map(|k| k.to_string()),
        m: cell.m,
        seed: cell.seed,
        lambda: cfg.lambda,
        metric: cfg.metric.to_string(),
        value: None,
        approx_error: None,
        reduce_time_ms: 0.0,
        opt_time_ms: 0.0,
        status: STATUS_OK.to_string(),
    };
    let outcome = (|| -> nor_core::Result<()> {
        if !cfg.lambda_grid.is_empty() {
            record.lambda = tune_lambda(cfg, cell, data, seed, &solver)?;
        }
        let model = train_cell(cell, &data.x_train, &data.y_train, cfg.loss, record.lambda, seed, &solver)?;
        record.value = Some(evaluate(&model, &data.x_test, &data.y_test, cfg.metric)?);
        record.reduce_time_ms = model.meta.reduce_time_ms;
        record.opt_time_ms = model.meta.opt_time_ms;
        if let Some(p) = model.projector()? {
            record.approx_error = Some(approx_error(&data.x_train, &p, APPROX_ERROR_TOL)?.value);
        }
        if !model.meta.converged {
            log::warn!("{} {:?} m={:?} seed={}: solver stopped before tolerance", cell.method, cell.operator, cell.m, cell.seed);
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        log::warn!("cell {cell:?} failed: {e}");
        record.value = None;
        record.approx_error = None;
        record.status = format!("failed: {e}");
    }
    record
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(threads).build()?)
}

/// Runs every cell of the grid on a pool of `cfg.threads` workers and
/// returns one record per cell in grid order. Cell failures become failed
/// rows; only an invalid config or an unloadable dataset is an error.
pub fn run(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    cfg.validate()?;
    let ds = load_dataset(&cfg.dataset, cfg.loss)?;
    let name = cfg.dataset.name();
    let train_len = ds.train_len;
    let data = split(ds.x, ds.labels, train_len);
    let grid = cells(cfg);
    log::info!("{} cells on {name} ({} train / {} test)", grid.len(), data.y_train.len(), data.y_test.len());
    let records = pool(cfg.threads)?.install(|| grid.par_iter().map(|c| run_cell(cfg, &name, c, &data)).collect());
    Ok(records)
}

pub(crate) fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    Ok(pool(threads)?.install(f))
}
