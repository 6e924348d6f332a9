//! Randomized reduction operators.
//!
//! Every operator is a linear map `S: R^{in_dim} → R^{m}` stored in compact
//! form. Along the feature axis it reduces each example, `x̂ = Sx`
//! (`A = S ∈ R^{m×d}`). Along the sample axis it sketches the data matrix,
//! `Y = XSᵀ` (`Ω = Sᵀ ∈ R^{n×m}`).
//!
//! Scaling conventions (`N` is `in_dim` rounded up to a power of two):
//!
//! | kind | entries of `S` |
//! |------|----------------|
//! | RS   | `√(in_dim/m)` at the sampled coordinate |
//! | RG   | `N(0, 1/m)` on the feature axis, `N(0, 1)` on the sample axis |
//! | SRHT | `√(N/m)·P·H·D` with `H` the normalized Hadamard matrix |
//! | RH   | `±1/√s`, one slot per block |
//!
//! The subspace `range(XΩ)` does not depend on any of these constants.
//!
//! Random state is drawn from `ChaCha8Rng::seed_from_u64(seed)` in a fixed
//! order, so an operator is reproduced bit-for-bit from its [`SketchConfig`]:
//!
//! * RS: `m` draws of `random_range` (a partial Fisher-Yates shuffle of
//!   `0..in_dim` without replacement, plain uniform draws with replacement);
//! * RG: `m·in_dim` standard normals, column-major in the `m × in_dim` matrix;
//! * SRHT: `in_dim` sign bits, then a partial Fisher-Yates shuffle of `0..N`;
//! * RH: for each input coordinate and each block, a bucket then a sign bit.

use crate::error::{check_dim, Error, Result};
use crate::matcore::{fwht_in_place, next_power_of_two, DataMatrix, DenseMatrix};
use crate::rng::{self, StreamRng};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SketchKind {
    RandomSampling { with_replacement: bool },
    RandomGaussian,
    Srht,
    RandomHashing { blocks: usize },
}

impl SketchKind {
    pub const RS: SketchKind = SketchKind::RandomSampling { with_replacement: false };
    pub const RG: SketchKind = SketchKind::RandomGaussian;
    pub const SRHT: SketchKind = SketchKind::Srht;
    pub const RH: SketchKind = SketchKind::RandomHashing { blocks: 1 };

    pub fn short_name(&self) -> &'static str {
        match self {
            SketchKind::RandomSampling { .. } => "RS",
            SketchKind::RandomGaussian => "RG",
            SketchKind::Srht => "SRHT",
            SketchKind::RandomHashing { .. } => "RH",
        }
    }

    pub fn hash_blocks(&self) -> usize {
        match self {
            SketchKind::RandomHashing { blocks } => *blocks,
            _ => 1,
        }
    }
}

impl fmt::Display for SketchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for SketchKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "RS" => Ok(SketchKind::RS),
            "RS-R" | "RSR" => Ok(SketchKind::RandomSampling { with_replacement: true }),
            "RG" => Ok(SketchKind::RG),
            "SRHT" => Ok(SketchKind::SRHT),
            "RH" => Ok(SketchKind::RH),
            other => Err(Error::InvalidConfig(format!("unknown sketch kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    /// Oblivious feature reduction, `x̂ = Ax`.
    Feature,
    /// Sample sketching, `Y = XΩ`.
    Sample,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::Feature => "feature",
            Axis::Sample => "sample",
        })
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "feature" => Ok(Axis::Feature),
            "sample" => Ok(Axis::Sample),
            other => Err(Error::InvalidConfig(format!("unknown axis '{other}'"))),
        }
    }
}

/// Everything needed to rebuild an operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SketchConfig {
    pub kind: SketchKind,
    pub in_dim: usize,
    pub out_dim: usize,
    pub seed: u64,
    pub axis: Axis,
}

impl SketchConfig {
    pub fn new(kind: SketchKind, in_dim: usize, out_dim: usize, seed: u64, axis: Axis) -> Self {
        Self { kind, in_dim, out_dim, seed, axis }
    }

    /// `key=value` lines: `kind`, `in_dim`, `m`, `s`, `replacement`, `seed`, `axis`.
    pub fn to_kv_text(&self) -> String {
        let replacement = matches!(self.kind, SketchKind::RandomSampling { with_replacement: true });
        format!(
            "kind={}\nin_dim={}\nm={}\ns={}\nreplacement={}\nseed={}\naxis={}\n",
            self.kind.short_name(),
            self.in_dim,
            self.out_dim,
            self.kind.hash_blocks(),
            replacement,
            self.seed,
            self.axis
        )
    }

    pub fn from_kv_text(text: &str) -> Result<Self> {
        let mut kind = None;
        let mut in_dim = None;
        let mut m = None;
        let mut s = 1usize;
        let mut replacement = false;
        let mut seed = None;
        let mut axis = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: lineno + 1,
                message: format!("expected key=value, got '{line}'"),
            })?;
            let value = value.trim();
            let bad = |what: &str| Error::Parse {
                line: lineno + 1,
                message: format!("invalid {what} '{value}'"),
            };
            match key.trim() {
                "kind" => kind = Some(value.parse::<SketchKind>().map_err(|_| bad("kind"))?),
                "in_dim" => in_dim = Some(value.parse().map_err(|_| bad("in_dim"))?),
                "m" => m = Some(value.parse().map_err(|_| bad("m"))?),
                "s" => s = value.parse().map_err(|_| bad("s"))?,
                "replacement" => replacement = value.parse().map_err(|_| bad("replacement"))?,
                "seed" => seed = Some(value.parse().map_err(|_| bad("seed"))?),
                "axis" => axis = Some(value.parse::<Axis>().map_err(|_| bad("axis"))?),
                other => {
                    return Err(Error::Parse { line: lineno + 1, message: format!("unknown key '{other}'") })
                }
            }
        }
        let missing = |k: &str| Error::InvalidConfig(format!("missing key '{k}'"));
        let kind = match kind.ok_or_else(|| missing("kind"))? {
            SketchKind::RandomSampling { .. } => SketchKind::RandomSampling { with_replacement: replacement },
            SketchKind::RandomHashing { .. } => SketchKind::RandomHashing { blocks: s },
            k => k,
        };
        Ok(Self {
            kind,
            in_dim: in_dim.ok_or_else(|| missing("in_dim"))?,
            out_dim: m.ok_or_else(|| missing("m"))?,
            seed: seed.ok_or_else(|| missing("seed"))?,
            axis: axis.ok_or_else(|| missing("axis"))?,
        })
    }

    fn validate(&self) -> Result<()> {
        let (d, m) = (self.in_dim, self.out_dim);
        if d == 0 || m == 0 {
            return Err(Error::InvalidConfig(format!("dimensions must be positive (in_dim={d}, m={m})")));
        }
        match self.kind {
            SketchKind::RandomSampling { with_replacement: false } if m > d => Err(Error::InvalidConfig(
                format!("random sampling without replacement needs m ≤ in_dim (m={m}, in_dim={d})"),
            )),
            SketchKind::Srht if m > next_power_of_two(d) => Err(Error::InvalidConfig(format!(
                "SRHT needs m ≤ padded dimension {} (m={m})",
                next_power_of_two(d)
            ))),
            SketchKind::RandomHashing { blocks } if blocks == 0 || m < blocks || m % blocks != 0 => {
                Err(Error::InvalidConfig(format!("random hashing needs s ≥ 1 dividing m (s={blocks}, m={m})")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum State {
    Sampling { indices: Vec<usize>, scale: f64 },
    /// `S` itself, `m × in_dim`, column-major.
    Gaussian { entries: DenseMatrix },
    Srht { signs: Vec<f64>, padded: usize, rows: Vec<usize>, scale: f64 },
    /// Output slot and signed weight of input `i` in block `k` live at `i·s + k`.
    Hashing { slots: Vec<usize>, weights: Vec<f64>, blocks: usize },
}

/// A materialized randomized reduction operator.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchOperator {
    config: SketchConfig,
    state: State,
}

/// Seed of the `index`-th operator drawn under `master_seed`.
pub fn operator_seed(master_seed: u64, index: u64) -> u64 {
    rng::derive_seed(master_seed, &[index])
}

pub fn make_operator(kind: SketchKind, in_dim: usize, m: usize, seed: u64, axis: Axis) -> Result<SketchOperator> {
    SketchOperator::from_config(SketchConfig::new(kind, in_dim, m, seed, axis))
}

fn partial_shuffle(rng: &mut StreamRng, n: usize, m: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).collect();
    for j in 0..m {
        let k = rng.random_range(j..n);
        pool.swap(j, k);
    }
    pool.truncate(m);
    pool
}

fn random_sign(rng: &mut StreamRng) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

fn hadamard_sign(i: usize, j: usize) -> f64 {
    if (i & j).count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

impl SketchOperator {
    pub fn from_config(config: SketchConfig) -> Result<Self> {
        config.validate()?;
        let (d, m) = (config.in_dim, config.out_dim);
        let mut rng = rng::stream(config.seed);
        let state = match config.kind {
            SketchKind::RandomSampling { with_replacement } => {
                let indices = if with_replacement {
                    (0..m).map(|_| rng.random_range(0..d)).collect()
                } else {
                    partial_shuffle(&mut rng, d, m)
                };
                State::Sampling { indices, scale: (d as f64 / m as f64).sqrt() }
            }
            SketchKind::RandomGaussian => {
                let std = match config.axis {
                    Axis::Feature => 1.0 / (m as f64).sqrt(),
                    Axis::Sample => 1.0,
                };
                let values = (0..m * d)
                    .map(|_| std * Distribution::<f64>::sample(&StandardNormal, &mut rng))
                    .collect::<Vec<f64>>();
                State::Gaussian { entries: DenseMatrix::from_vec_unchecked(m, d, values) }
            }
            SketchKind::Srht => {
                let padded = next_power_of_two(d);
                let signs = (0..d).map(|_| random_sign(&mut rng)).collect();
                let rows = partial_shuffle(&mut rng, padded, m);
                // √(N/m) · (1/√N) from the normalized transform.
                State::Srht { signs, padded, rows, scale: 1.0 / (m as f64).sqrt() }
            }
            SketchKind::RandomHashing { blocks } => {
                let buckets = m / blocks;
                let weight = 1.0 / (blocks as f64).sqrt();
                let mut slots = Vec::with_capacity(d * blocks);
                let mut weights = Vec::with_capacity(d * blocks);
                for _ in 0..d {
                    for k in 0..blocks {
                        slots.push(k * buckets + rng.random_range(0..buckets));
                        weights.push(weight * random_sign(&mut rng));
                    }
                }
                State::Hashing { slots, weights, blocks }
            }
        };
        Ok(Self { config, state })
    }

    pub fn config(&self) -> &SketchConfig {
        &self.config
    }

    pub fn kind(&self) -> SketchKind {
        self.config.kind
    }

    pub fn in_dim(&self) -> usize {
        self.config.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.config.out_dim
    }

    pub fn axis(&self) -> Axis {
        self.config.axis
    }

    /// Sampled coordinates (RS) or sampled Hadamard rows (SRHT).
    pub fn sampled_indices(&self) -> Option<&[usize]> {
        match &self.state {
            State::Sampling { indices, .. } => Some(indices),
            State::Srht { rows, .. } => Some(rows),
            _ => None,
        }
    }

    /// Nonzero entries `(out, weight)` of column `i` of `S`.
    fn for_each_in_input_column(&self, i: usize, mut f: impl FnMut(usize, f64)) {
        match &self.state {
            State::Sampling { indices, scale } => {
                for (j, &idx) in indices.iter().enumerate() {
                    if idx == i {
                        f(j, *scale);
                    }
                }
            }
            State::Gaussian { entries } => {
                for (j, &v) in entries.column(i).iter().enumerate() {
                    f(j, v);
                }
            }
            State::Srht { signs, rows, scale, .. } => {
                for (j, &r) in rows.iter().enumerate() {
                    f(j, scale * signs[i] * hadamard_sign(i, r));
                }
            }
            State::Hashing { slots, weights, blocks } => {
                for k in 0..*blocks {
                    f(slots[i * blocks + k], weights[i * blocks + k]);
                }
            }
        }
    }

    /// The operator as an explicit `m × in_dim` matrix `S`.
    pub fn materialize(&self) -> DenseMatrix {
        let (d, m) = (self.in_dim(), self.out_dim());
        let mut out = DenseMatrix::zeros(m, d);
        for i in 0..d {
            let col = out.column_mut(i);
            self.for_each_in_input_column(i, |j, w| col[j] += w);
        }
        out
    }

    /// `Ω = Sᵀ ∈ R^{in_dim × m}`, the sample-axis matrix with `Y = XΩ`.
    pub fn omega(&self) -> DenseMatrix {
        self.materialize().transpose()
    }

    /// `S·x` for a dense vector.
    pub fn apply_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("sketch apply_vec", self.in_dim(), x.len())?;
        let mut out = vec![0.0; self.out_dim()];
        match &self.state {
            State::Sampling { indices, scale } => {
                for (o, &idx) in out.iter_mut().zip(indices) {
                    *o = scale * x[idx];
                }
            }
            State::Gaussian { entries } => {
                for (i, &xi) in x.iter().enumerate() {
                    if xi != 0.0 {
                        crate::matcore::axpy(xi, entries.column(i), &mut out);
                    }
                }
            }
            State::Srht { signs, padded, rows, scale } => {
                let mut buf = vec![0.0; *padded];
                for (b, (xi, si)) in buf.iter_mut().zip(x.iter().zip(signs)) {
                    *b = xi * si;
                }
                fwht_in_place(&mut buf)?;
                for (o, &r) in out.iter_mut().zip(rows) {
                    *o = scale * buf[r];
                }
            }
            State::Hashing { slots, weights, blocks } => {
                for (i, &xi) in x.iter().enumerate() {
                    for k in 0..*blocks {
                        out[slots[i * blocks + k]] += weights[i * blocks + k] * xi;
                    }
                }
            }
        }
        Ok(out)
    }

    /// `S·x` for a sparse vector given as parallel index/value slices.
    fn apply_sparse_vec(&self, idx: &[usize], val: &[f64], scratch: &mut [f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        match &self.state {
            State::Sampling { indices, scale } => {
                for (&r, &v) in idx.iter().zip(val) {
                    scratch[r] = v;
                }
                for (o, &k) in out.iter_mut().zip(indices) {
                    *o = scale * scratch[k];
                }
                for &r in idx {
                    scratch[r] = 0.0;
                }
            }
            State::Gaussian { entries } => {
                for (&r, &v) in idx.iter().zip(val) {
                    crate::matcore::axpy(v, entries.column(r), out);
                }
            }
            State::Srht { signs, padded, rows, scale } => {
                let log_n = padded.trailing_zeros().max(1) as usize;
                if idx.len() * rows.len() <= padded * log_n {
                    for (o, &row) in out.iter_mut().zip(rows) {
                        let s: f64 = idx
                            .iter()
                            .zip(val)
                            .map(|(&r, &v)| v * signs[r] * hadamard_sign(r, row))
                            .sum();
                        *o = scale * s;
                    }
                } else {
                    let buf = &mut scratch[..*padded];
                    buf.iter_mut().for_each(|b| *b = 0.0);
                    for (&r, &v) in idx.iter().zip(val) {
                        buf[r] = v * signs[r];
                    }
                    fwht_in_place(buf).expect("padded length is a power of two");
                    for (o, &r) in out.iter_mut().zip(rows) {
                        *o = scale * buf[r];
                    }
                    buf.iter_mut().for_each(|b| *b = 0.0);
                }
            }
            State::Hashing { slots, weights, blocks } => {
                for (&r, &v) in idx.iter().zip(val) {
                    for k in 0..*blocks {
                        out[slots[r * blocks + k]] += weights[r * blocks + k] * v;
                    }
                }
            }
        }
    }

    fn require_axis(&self, axis: Axis) -> Result<()> {
        if self.axis() == axis {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "operator built for the {} axis used on the {axis} axis",
                self.axis()
            )))
        }
    }

    /// Oblivious feature reduction `X̂ = AX ∈ R^{m×n}`.
    pub fn apply_features(&self, x: &DataMatrix) -> Result<DenseMatrix> {
        self.require_axis(Axis::Feature)?;
        check_dim("apply_features rows", self.in_dim(), x.rows())?;
        let (m, n) = (self.out_dim(), x.cols());
        let mut out = DenseMatrix::zeros(m, n);
        match x {
            DataMatrix::Dense(dense) => {
                for j in 0..n {
                    let col = self.apply_vec(dense.column(j))?;
                    out.column_mut(j).copy_from_slice(&col);
                }
            }
            DataMatrix::Sparse(sparse) => {
                let mut scratch = vec![0.0; next_power_of_two(self.in_dim())];
                for j in 0..n {
                    let (idx, val) = sparse.column(j);
                    self.apply_sparse_vec(idx, val, &mut scratch, out.column_mut(j));
                }
            }
        }
        Ok(out)
    }

    /// Sample sketch `Y = XΩ ∈ R^{d×m}`. Sparse `X` is never densified.
    pub fn apply_samples(&self, x: &DataMatrix) -> Result<DenseMatrix> {
        self.require_axis(Axis::Sample)?;
        check_dim("apply_samples cols", self.in_dim(), x.cols())?;
        let (d, m) = (x.rows(), self.out_dim());
        let mut y = DenseMatrix::zeros(d, m);
        match &self.state {
            State::Sampling { indices, scale } => {
                for (j, &i) in indices.iter().enumerate() {
                    let dst = y.column_mut(j);
                    x.for_each_in_column(i, |r, v| dst[r] += scale * v);
                }
            }
            State::Srht { signs, padded, rows, scale } if !x.is_sparse() => {
                // Dense rows: one fast transform per row of X.
                let dense = x.to_dense();
                let mut buf = vec![0.0; *padded];
                for r in 0..d {
                    buf.iter_mut().for_each(|b| *b = 0.0);
                    for (i, (b, s)) in buf.iter_mut().zip(signs).enumerate() {
                        *b = dense.get(r, i) * s;
                    }
                    fwht_in_place(&mut buf)?;
                    for (j, &row) in rows.iter().enumerate() {
                        y.column_mut(j)[r] = scale * buf[row];
                    }
                }
            }
            _ => {
                let vals = y.values_mut();
                for i in 0..x.cols() {
                    self.for_each_in_input_column(i, |j, w| {
                        if w != 0.0 {
                            let dst = &mut vals[j * d..(j + 1) * d];
                            x.for_each_in_column(i, |r, v| dst[r] += w * v);
                        }
                    });
                }
            }
        }
        Ok(y)
    }
}

/// Per-vector relative distortion `|‖Ax‖² − ‖x‖²| / ‖x‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct JlReport {
    pub distortions: Vec<f64>,
    /// Zero vectors are skipped and counted here.
    pub skipped_zero: usize,
}

impl JlReport {
    pub fn max(&self) -> f64 {
        self.distortions.iter().copied().fold(0.0, f64::max)
    }

    /// Empirical `q`-quantile (nearest rank) of the distortions.
    pub fn quantile(&self, q: f64) -> f64 {
        if self.distortions.is_empty() {
            return 0.0;
        }
        let mut sorted = self.distortions.clone();
        sorted.sort_by(f64::total_cmp);
        let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
        sorted[rank - 1]
    }

    pub fn fraction_within(&self, envelope: f64) -> f64 {
        if self.distortions.is_empty() {
            return 1.0;
        }
        self.distortions.iter().filter(|&&d| d <= envelope).count() as f64 / self.distortions.len() as f64
    }
}

/// `c·√(ln(1/δ)/m)`, the distortion level a JL map keeps with probability `1 − δ`.
pub fn jl_envelope(c: f64, delta: f64, m: usize) -> f64 {
    c * ((1.0 / delta).ln() / m as f64).sqrt()
}

pub fn jl_distortion(a: &SketchOperator, vectors: &[Vec<f64>]) -> Result<JlReport> {
    a.require_axis(Axis::Feature)?;
    let mut distortions = Vec::with_capacity(vectors.len());
    let mut skipped_zero = 0;
    for x in vectors {
        let nx: f64 = x.iter().map(|v| v * v).sum();
        if nx == 0.0 {
            skipped_zero += 1;
            continue;
        }
        let ax = a.apply_vec(x)?;
        let nax: f64 = ax.iter().map(|v| v * v).sum();
        distortions.push((nax - nx).abs() / nx);
    }
    if skipped_zero > 0 {
        log::warn!("jl_distortion skipped {skipped_zero} zero vectors");
    }
    Ok(JlReport { distortions, skipped_zero })
}
