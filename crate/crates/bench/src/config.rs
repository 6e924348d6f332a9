//! Experiment configuration and its `key = value` text form.
//!
//! ```text
//! # exp-decay parity run
//! dataset = synthetic
//! d = 200
//! n = 5000
//! t = 10
//! decay = exp-1
//! methods = Full, NOR, RP, RPDR
//! operators = RG
//! m_grid = 50
//! seeds = 0, 1, 2
//! lambda_grid = 0.001, 0.01, 0.1, 1
//! ```
//!
//! Lists are comma separated, `#` starts a comment. Command-line flags go
//! through the same [`ExperimentConfig::set`] entry point, so every flag has
//! a config-file key of the same name (dashes and underscores are
//! interchangeable).

use crate::error::{BenchError, Result};
use nor_core::datagen::{Decay, SyntheticConfig};
use nor_core::erm::{Loss, Metric, ModelMode};
use nor_core::sketch::SketchKind;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DatasetSpec {
    Synthetic(SyntheticConfig),
    Libsvm { path: PathBuf, n_features: Option<usize> },
}

impl DatasetSpec {
    /// Name written to the `dataset` column.
    pub fn name(&self) -> String {
        match self {
            DatasetSpec::Synthetic(c) => format!("synthetic_{}_d{}_n{}_t{}_seed{}", c.decay, c.d, c.n, c.t, c.seed),
            DatasetSpec::Libsvm { path, .. } => path
                .file_name()
                .map(|f| f.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub methods: Vec<ModelMode>,
    pub operators: Vec<SketchKind>,
    pub m_grid: Vec<usize>,
    /// Replicate indices; each enters the per-cell seed derivation.
    pub seeds: Vec<u64>,
    pub master_seed: u64,
    pub lambda: f64,
    /// When nonempty, λ is chosen per cell from this grid on a holdout
    /// split of the training data and `lambda` is ignored.
    pub lambda_grid: Vec<f64>,
    pub loss: Loss,
    pub gap_tol: f64,
    pub metric: Metric,
    /// Worker threads; 0 lets the pool pick.
    pub threads: usize,
    /// With timings off every output byte is a function of the config.
    pub record_timings: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSpec::Synthetic(SyntheticConfig::default()),
            methods: vec![ModelMode::Full, ModelMode::Nor, ModelMode::Rp, ModelMode::Rpdr],
            operators: vec![SketchKind::RG],
            m_grid: vec![50],
            seeds: vec![0],
            master_seed: 0,
            lambda: 0.01,
            lambda_grid: Vec::new(),
            loss: Loss::Hinge,
            gap_tol: 1e-3,
            metric: Metric::ErrorRate,
            threads: 0,
            record_timings: true,
        }
    }
}

fn invalid(message: impl Into<String>) -> BenchError {
    BenchError::Invalid(message.into())
}

fn parse_one<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| invalid(format!("{key}: cannot parse '{}'", value.trim())))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse_one(key, s)).collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        other => Err(invalid(format!("{key}: expected a boolean, got '{other}'"))),
    }
}

/// `hinge` or `softmax:K`.
pub fn parse_loss(value: &str) -> Result<Loss> {
    let v = value.trim().to_ascii_lowercase();
    if v == "hinge" {
        return Ok(Loss::Hinge);
    }
    match v.strip_prefix("softmax:") {
        Some(k) => Ok(Loss::Softmax { classes: parse_one("loss", k)? }),
        None => Err(invalid(format!("loss: expected 'hinge' or 'softmax:K', got '{v}'"))),
    }
}

pub fn loss_name(loss: Loss) -> String {
    match loss {
        Loss::Hinge => "hinge".into(),
        Loss::Softmax { classes } => format!("softmax:{classes}"),
    }
}

impl ExperimentConfig {
    fn synthetic_mut(&mut self, key: &str) -> Result<&mut SyntheticConfig> {
        match &mut self.dataset {
            DatasetSpec::Synthetic(c) => Ok(c),
            DatasetSpec::Libsvm { .. } => Err(invalid(format!("{key} applies to synthetic data only"))),
        }
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().to_ascii_lowercase().replace('-', "_");
        let v = value.trim();
        match key.as_str() {
            "dataset" => {
                self.dataset = if v.eq_ignore_ascii_case("synthetic") {
                    DatasetSpec::Synthetic(SyntheticConfig::default())
                } else {
                    DatasetSpec::Libsvm { path: PathBuf::from(v), n_features: None }
                }
            }
            "libsvm" => self.dataset = DatasetSpec::Libsvm { path: PathBuf::from(v), n_features: None },
            "n_features" => match &mut self.dataset {
                DatasetSpec::Libsvm { n_features, .. } => *n_features = Some(parse_one(&key, v)?),
                DatasetSpec::Synthetic(_) => return Err(invalid("n_features applies to libsvm data only")),
            },
            "d" => self.synthetic_mut(&key)?.d = parse_one(&key, v)?,
            "n" => self.synthetic_mut(&key)?.n = parse_one(&key, v)?,
            "t" => self.synthetic_mut(&key)?.t = parse_one(&key, v)?,
            "decay" => self.synthetic_mut(&key)?.decay = v.parse::<Decay>()?,
            "data_seed" => self.synthetic_mut(&key)?.seed = parse_one(&key, v)?,
            "full_scale" => {
                if parse_bool(&key, v)? {
                    let c = self.synthetic_mut(&key)?;
                    *c = SyntheticConfig::full_scale(c.decay, c.seed);
                }
            }
            "methods" => self.methods = parse_list(&key, v)?,
            "operators" => self.operators = parse_list(&key, v)?,
            "m_grid" | "m" => self.m_grid = parse_list(&key, v)?,
            "seeds" => self.seeds = parse_list(&key, v)?,
            "master_seed" => self.master_seed = parse_one(&key, v)?,
            "lambda" => self.lambda = parse_one(&key, v)?,
            "lambda_grid" => self.lambda_grid = parse_list(&key, v)?,
            "loss" => self.loss = parse_loss(v)?,
            "gap_tol" => self.gap_tol = parse_one(&key, v)?,
            "metric" => self.metric = v.parse()?,
            "threads" => self.threads = parse_one(&key, v)?,
            "record_timings" => self.record_timings = parse_bool(&key, v)?,
            other => return Err(invalid(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Applies every setting of a `key = value` text on top of `self`.
    pub fn apply_kv_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let config_err = |message: String| BenchError::Config { line: i + 1, message };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| config_err(format!("expected 'key = value', got '{line}'")))?;
            self.set(key, value).map_err(|e| config_err(e.to_string()))?;
        }
        Ok(())
    }

    pub fn from_kv_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_kv_text(text)?;
        Ok(cfg)
    }

    /// Renders the config in the form read by [`Self::from_kv_text`].
    pub fn to_kv_text(&self) -> String {
        fn join<T: ToString>(xs: &[T]) -> String {
            xs.iter().map(T::to_string).collect::<Vec<_>>().join(", ")
        }
        let mut out = String::new();
        match &self.dataset {
            DatasetSpec::Synthetic(c) => {
                out += &format!("dataset = synthetic\nd = {}\nn = {}\nt = {}\ndecay = {}\ndata_seed = {}\n", c.d, c.n, c.t, c.decay, c.seed);
            }
            DatasetSpec::Libsvm { path, n_features } => {
                out += &format!("libsvm = {}\n", path.display());
                if let Some(f) = n_features {
                    out += &format!("n_features = {f}\n");
                }
            }
        }
        out += &format!("methods = {}\noperators = {}\nm_grid = {}\nseeds = {}\n", join(&self.methods), join(&self.operators), join(&self.m_grid), join(&self.seeds));
        out += &format!("master_seed = {}\nlambda = {}\n", self.master_seed, self.lambda);
        if !self.lambda_grid.is_empty() {
            out += &format!("lambda_grid = {}\n", join(&self.lambda_grid));
        }
        out += &format!(
            "loss = {}\ngap_tol = {}\nmetric = {}\nthreads = {}\nrecord_timings = {}\n",
            loss_name(self.loss),
            self.gap_tol,
            self.metric,
            self.threads,
            self.record_timings
        );
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() || self.operators.is_empty() || self.m_grid.is_empty() || self.seeds.is_empty() {
            return Err(invalid("methods, operators, m_grid and seeds must be nonempty"));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(invalid(format!("lambda must be positive, got {}", self.lambda)));
        }
        if let Some(bad) = self.lambda_grid.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(invalid(format!("lambda_grid entries must be positive, got {bad}")));
        }
        if self.m_grid.contains(&0) {
            return Err(invalid("m must be at least 1"));
        }
        if !(self.gap_tol > 0.0) {
            return Err(invalid(format!("gap_tol must be positive, got {}", self.gap_tol)));
        }
        if let Loss::Softmax { .. } = self.loss {
            if self.methods.contains(&ModelMode::Rpdr) {
                return Err(invalid("RPDR needs the hinge loss"));
            }
            if self.metric == Metric::AuPRC {
                return Err(invalid("auPRC needs the hinge loss"));
            }
        }
        if let DatasetSpec::Synthetic(c) = &self.dataset {
            c.validate()?;
        }
        Ok(())
    }
}
