//! Synthetic data with a prescribed spectrum, libsvm I/O and the fixed
//! 90/10 train/test split.
//!
//! `gen_synthetic` draws from `ChaCha8Rng::seed_from_u64(seed)` in this order:
//! the `d × n` Gaussian matrix `M` column by column, then the `d` entries of
//! the labelling vector `w`, then the `t` noise rows one row at a time.

use crate::error::{Error, Result};
use crate::matcore::{svd_thin, DataMatrix, DenseMatrix, SparseMatrix};
use crate::rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Decay {
    /// `σ_i = e^{−iτ}`.
    Exp(f64),
    /// `σ_i = i^{−τ}`.
    Poly(f64),
}

impl Decay {
    pub fn tau(&self) -> f64 {
        match self {
            Decay::Exp(t) | Decay::Poly(t) => *t,
        }
    }

    /// `σ_i` for `i = 1..=d`.
    pub fn singular_values(&self, d: usize) -> Vec<f64> {
        (1..=d)
            .map(|i| match self {
                Decay::Exp(t) => (-(i as f64) * t).exp(),
                Decay::Poly(t) => (i as f64).powf(-t),
            })
            .collect()
    }
}

impl fmt::Display for Decay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Decay::Exp(t) => write!(f, "exp-{t}"),
            Decay::Poly(t) => write!(f, "poly-{t}"),
        }
    }
}

/// Parses `exp-1`, `poly-0.5` (`:` also accepted as separator).
impl FromStr for Decay {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let (name, tau) = s
            .split_once(['-', ':'])
            .ok_or_else(|| Error::InvalidConfig(format!("decay '{s}' is not of the form exp-τ or poly-τ")))?;
        let tau: f64 = tau.parse().map_err(|_| Error::InvalidConfig(format!("bad decay rate in '{s}'")))?;
        match name {
            "exp" => Ok(Decay::Exp(tau)),
            "poly" => Ok(Decay::Poly(tau)),
            other => Err(Error::InvalidConfig(format!("unknown decay '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub d: usize,
    pub n: usize,
    /// Appended pure-noise features.
    pub t: usize,
    pub decay: Decay,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self { d: 200, n: 5000, t: 10, decay: Decay::Exp(1.0), seed: 0 }
    }
}

impl SyntheticConfig {
    /// The full-scale setting `d = 1000`, `n = 10⁵`, `t = 10`.
    pub fn full_scale(decay: Decay, seed: u64) -> Self {
        Self { d: 1000, n: 100_000, t: 10, decay, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.n == 0 {
            return Err(Error::InvalidConfig("d and n must be at least 1".into()));
        }
        let tau = self.decay.tau();
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidConfig(format!("decay rate must be positive, got {tau}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Provenance {
    Synthetic { config: SyntheticConfig, sign_ties: usize },
    Libsvm { path: String },
}

/// Examples are the columns of `x`. The first `train_len` columns form the
/// training set and the rest the test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: DataMatrix,
    pub labels: Vec<f64>,
    pub train_len: usize,
    pub provenance: Provenance,
}

/// `⌊0.9·n⌋`, computed in integers.
pub fn train_size(n: usize) -> usize {
    n * 9 / 10
}

impl Dataset {
    pub fn new(x: DataMatrix, labels: Vec<f64>, provenance: Provenance) -> Result<Self> {
        crate::error::check_dim("dataset labels", x.cols(), labels.len())?;
        if labels.is_empty() {
            return Err(Error::EmptyDataset("dataset without examples".into()));
        }
        let train_len = train_size(labels.len());
        Ok(Self { x, labels, train_len, provenance })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn dim(&self) -> usize {
        self.x.rows()
    }

    pub fn train_indices(&self) -> std::ops::Range<usize> {
        0..self.train_len
    }

    pub fn test_indices(&self) -> std::ops::Range<usize> {
        self.train_len..self.n()
    }

    fn subset(&self, idx: std::ops::Range<usize>) -> (DataMatrix, Vec<f64>) {
        let cols: Vec<usize> = idx.clone().collect();
        (self.x.select_columns(&cols), self.labels[idx].to_vec())
    }

    pub fn train(&self) -> (DataMatrix, Vec<f64>) {
        self.subset(self.train_indices())
    }

    pub fn test(&self) -> (DataMatrix, Vec<f64>) {
        self.subset(self.test_indices())
    }

    /// Maps a two-valued label set onto `±1`, the larger value becoming `+1`.
    pub fn binarize_labels(&mut self) -> Result<()> {
        let mut values: Vec<f64> = self.labels.clone();
        values.sort_by(f64::total_cmp);
        values.dedup();
        match values.as_slice() {
            [_, b] => {
                let pos = *b;
                for y in self.labels.iter_mut() {
                    *y = if *y == pos { 1.0 } else { -1.0 };
                }
                Ok(())
            }
            [_] => Err(Error::InvalidInput("labels take a single value".into())),
            _ => Err(Error::InvalidInput(format!("{} distinct labels, expected two", values.len()))),
        }
    }
}

/// Generates `X ∈ R^{(d+t)×n}` and labels:
///
/// 1. `M ~ N(0,1)^{d×n}`, `M = USVᵀ` (thin SVD, `Σ` is `min(d,n)` square);
/// 2. `X_b = √n·U·diag(σ)·Vᵀ` with `σ` from the configured decay;
/// 3. `w ~ N(0,1)^d`, `y = sign(X_bᵀw)` with `sign(0) = +1`;
/// 4. `t` rows of `N(0,1)` noise appended below `X_b`.
pub fn gen_synthetic(cfg: &SyntheticConfig) -> Result<Dataset> {
    cfg.validate()?;
    let (d, n, t) = (cfg.d, cfg.n, cfg.t);
    let mut rng = rng::stream(cfg.seed);
    let mut normal = move || -> f64 { StandardNormal.sample(&mut rng) };

    let m_values: Vec<f64> = (0..d * n).map(|_| normal()).collect();
    let m = DenseMatrix::new(d, n, m_values)?;
    let svd = svd_thin(&m, 0.0)?;
    let k = d.min(n);
    if svd.rank() < k {
        return Err(Error::NumericalFailure(format!("Gaussian draw has rank {} < {k}", svd.rank())));
    }
    let (u, _, v) = svd.into_parts();
    let sigma = cfg.decay.singular_values(k);
    let scale = (n as f64).sqrt();
    let mut us = u;
    for (j, s) in sigma.iter().enumerate() {
        us.column_mut(j).iter_mut().for_each(|x| *x *= scale * s);
    }
    let xb = us.matmul(&v.transpose())?;

    let w: Vec<f64> = (0..d).map(|_| normal()).collect();
    let margins = xb.tr_mul_vec(&w)?;
    let sign_ties = margins.iter().filter(|&&z| z == 0.0).count();
    if sign_ties > 0 {
        log::warn!("{sign_ties} zero margins labelled +1");
    }
    let labels: Vec<f64> = margins.iter().map(|&z| if z >= 0.0 { 1.0 } else { -1.0 }).collect();

    let noise: Vec<f64> = (0..t * n).map(|_| normal()).collect();
    let x = DenseMatrix::from_fn(d + t, n, |i, j| if i < d { xb.get(i, j) } else { noise[(i - d) * n + j] })?;
    Dataset::new(DataMatrix::Dense(x), labels, Provenance::Synthetic { config: *cfg, sign_ties })
}

/// Parses libsvm text: `label idx:val idx:val …` with 1-based, strictly
/// increasing indices. Blank lines and `#` comments are skipped. The feature
/// count is the largest index seen, or `n_features` when given and larger.
pub fn parse_libsvm(text: &str, n_features: Option<usize>) -> Result<(SparseMatrix, Vec<f64>)> {
    let mut columns = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0usize;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse { line: lineno + 1, message };
        let mut tokens = line.split_whitespace();
        let label_tok = tokens.next().expect("nonempty line");
        let label: f64 = label_tok.parse().map_err(|_| err(format!("bad label '{label_tok}'")))?;
        if !label.is_finite() {
            return Err(err(format!("non-finite label '{label_tok}'")));
        }
        let mut col = Vec::new();
        let mut prev = 0usize;
        for tok in tokens {
            let (idx, val) = tok.split_once(':').ok_or_else(|| err(format!("expected idx:val, found '{tok}'")))?;
            let idx: usize = idx.parse().map_err(|_| err(format!("bad feature index in '{tok}'")))?;
            if idx == 0 {
                return Err(err("feature indices are 1-based".into()));
            }
            if idx <= prev {
                return Err(err(format!("feature index {idx} not greater than previous {prev}")));
            }
            let val: f64 = val.parse().map_err(|_| err(format!("bad value in '{tok}'")))?;
            if !val.is_finite() {
                return Err(err(format!("non-finite value in '{tok}'")));
            }
            prev = idx;
            col.push((idx - 1, val));
        }
        max_index = max_index.max(prev);
        labels.push(label);
        columns.push(col);
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset("libsvm input has no examples".into()));
    }
    let d = n_features.map_or(max_index, |f| f.max(max_index));
    Ok((SparseMatrix::from_columns(d, columns)?, labels))
}

pub fn load_libsvm(path: impl AsRef<Path>, n_features: Option<usize>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let (x, labels) = parse_libsvm(&text, n_features)?;
    Dataset::new(DataMatrix::Sparse(x), labels, Provenance::Libsvm { path: path.display().to_string() })
}

/// Writes libsvm text with shortest round-trip float formatting; zero
/// entries are omitted.
pub fn write_libsvm(x: &DataMatrix, labels: &[f64], out: &mut impl Write) -> Result<()> {
    crate::error::check_dim("libsvm labels", x.cols(), labels.len())?;
    for (j, y) in labels.iter().enumerate() {
        let mut line = format!("{y}");
        x.for_each_in_column(j, |i, v| {
            if v != 0.0 {
                line.push_str(&format!(" {}:{v}", i + 1));
            }
        });
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

pub fn save_libsvm(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_libsvm(&ds.x, &ds.labels, &mut w)?;
    w.flush()?;
    Ok(())
}
