//! Benchmark chaotic series, noise injection and delay embedding.
//!
//! Both generators return the x-component. Lorenz is integrated with classical
//! fourth-order Runge-Kutta at the sampling step; Hénon is a map and is given a
//! nominal sampling period of 0.01 s so that windows expressed in seconds map to
//! 100 samples per second.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Any state component above this magnitude aborts generation.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// Sampling period assigned to Hénon samples.
pub const HENON_DT: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub values: Vec<f64>,
    pub dt: f64,
    pub origin_time: f64,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>, dt: f64, origin_time: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::arg(format!("sampling period must be positive, got {dt}")));
        }
        if values.is_empty() {
            return Err(Error::arg("time series must hold at least one sample"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::arg(format!("non-finite value at index {i}")));
        }
        Ok(Self { values, dt, origin_time })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time_at(&self, index: usize) -> f64 {
        self.origin_time + index as f64 * self.dt
    }

    /// Index of the sample nearest to `seconds` measured from the origin.
    pub fn index_of(&self, seconds: f64) -> usize {
        ((seconds - self.origin_time) / self.dt).round().max(0.0) as usize
    }

    /// Sub-series `[start, start + len)`; the origin time moves with the slice.
    pub fn slice(&self, start: usize, len: usize) -> Result<TimeSeries> {
        let end = start
            .checked_add(len)
            .filter(|&e| e <= self.len() && len > 0)
            .ok_or_else(|| {
                Error::arg(format!(
                    "slice [{start}, {start}+{len}) out of range for series of length {}",
                    self.len()
                ))
            })?;
        Ok(TimeSeries {
            values: self.values[start..end].to_vec(),
            dt: self.dt,
            origin_time: self.time_at(start),
        })
    }

    /// Drops a warm-up prefix of `n` samples.
    pub fn skip(&self, n: usize) -> Result<TimeSeries> {
        self.slice(n, self.len().saturating_sub(n))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorenzParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub initial_state: [f64; 3],
}

impl Default for LorenzParams {
    fn default() -> Self {
        Self { a: 10.0, b: 28.0, c: 8.0 / 3.0, initial_state: [-15.0, 0.0, 0.0] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HenonParams {
    pub a: f64,
    pub b: f64,
    pub initial_state: [f64; 2],
}

impl Default for HenonParams {
    fn default() -> Self {
        Self { a: 1.4, b: 0.3, initial_state: [0.0, 0.0] }
    }
}

pub fn lorenz_derivative(state: [f64; 3], p: &LorenzParams) -> [f64; 3] {
    let [x, y, z] = state;
    [p.a * (y - x), p.b * x - y - x * z, x * y - p.c * z]
}

fn rk4_step(state: [f64; 3], p: &LorenzParams, h: f64) -> [f64; 3] {
    let add = |s: [f64; 3], k: [f64; 3], f: f64| [s[0] + f * k[0], s[1] + f * k[1], s[2] + f * k[2]];
    let k1 = lorenz_derivative(state, p);
    let k2 = lorenz_derivative(add(state, k1, h / 2.0), p);
    let k3 = lorenz_derivative(add(state, k2, h / 2.0), p);
    let k4 = lorenz_derivative(add(state, k3, h), p);
    let mut out = state;
    for i in 0..3 {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Integrates the Lorenz system and samples x every `dt` seconds, starting at t = 0.
pub fn generate_lorenz(params: &LorenzParams, dt: f64, n: usize) -> Result<TimeSeries> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::arg(format!("dt must be positive, got {dt}")));
    }
    if n == 0 {
        return Err(Error::arg("n must be at least 1"));
    }
    let mut state = params.initial_state;
    let mut values = Vec::with_capacity(n);
    values.push(state[0]);
    for step in 1..n {
        state = rk4_step(state, params, dt);
        if state.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT) {
            return Err(Error::Divergence { step, limit: DIVERGENCE_LIMIT });
        }
        values.push(state[0]);
    }
    TimeSeries::new(values, dt, 0.0)
}

pub fn henon_step(state: [f64; 2], p: &HenonParams) -> [f64; 2] {
    let [x, y] = state;
    [1.0 - p.a * x * x + y, p.b * x]
}

/// Iterates the Hénon map `n - 1` times and returns the x-sequence.
pub fn generate_henon(params: &HenonParams, n: usize) -> Result<TimeSeries> {
    if n == 0 {
        return Err(Error::arg("n must be at least 1"));
    }
    let mut state = params.initial_state;
    let mut values = Vec::with_capacity(n);
    values.push(state[0]);
    for step in 1..n {
        state = henon_step(state, params);
        if state.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT) {
            return Err(Error::Divergence { step, limit: DIVERGENCE_LIMIT });
        }
        values.push(state[0]);
    }
    TimeSeries::new(values, HENON_DT, 0.0)
}

/// Adds i.i.d. zero-mean Gaussian noise. `std == 0` returns the input untouched.
pub fn add_noise(series: &TimeSeries, std: f64, seed: u64) -> Result<TimeSeries> {
    if !(std >= 0.0) || !std.is_finite() {
        return Err(Error::arg(format!("noise std must be non-negative, got {std}")));
    }
    if std == 0.0 {
        return Ok(series.clone());
    }
    let normal = Normal::new(0.0, std).map_err(|e| Error::arg(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = series.values.iter().map(|v| v + normal.sample(&mut rng)).collect();
    Ok(TimeSeries { values, dt: series.dt, origin_time: series.origin_time })
}

/// Supervised pairs built from a delay embedding.
///
/// Input `j` is `[x(t), x(t-L), ..., x(t-(R-1)L)]` (most recent first) and its
/// target is `x(t+h)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedDataset {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub dim: usize,
    pub lag: usize,
    pub horizon: usize,
}

impl EmbeddedDataset {
    pub fn new(
        inputs: Vec<Vec<f64>>,
        targets: Vec<f64>,
        dim: usize,
        lag: usize,
        horizon: usize,
    ) -> Result<Self> {
        if dim == 0 || lag == 0 || horizon == 0 {
            return Err(Error::arg("dim, lag and horizon must all be at least 1"));
        }
        if inputs.len() != targets.len() {
            return Err(Error::arg(format!(
                "{} inputs but {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        if let Some(j) = inputs.iter().position(|v| v.len() != dim) {
            return Err(Error::arg(format!("input {j} does not have dimension {dim}")));
        }
        Ok(Self { inputs, targets, dim, lag, horizon })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn range(&self, start: usize, end: usize) -> EmbeddedDataset {
        EmbeddedDataset {
            inputs: self.inputs[start..end].to_vec(),
            targets: self.targets[start..end].to_vec(),
            dim: self.dim,
            lag: self.lag,
            horizon: self.horizon,
        }
    }
}

/// Smallest series length that yields one embedded pair.
pub fn min_embed_len(dim: usize, lag: usize, horizon: usize) -> usize {
    (dim - 1) * lag + horizon + 1
}

pub fn embed(series: &TimeSeries, dim: usize, lag: usize, horizon: usize) -> Result<EmbeddedDataset> {
    if dim == 0 || lag == 0 || horizon == 0 {
        return Err(Error::arg("dim, lag and horizon must all be at least 1"));
    }
    let need = min_embed_len(dim, lag, horizon);
    let x = &series.values;
    if x.len() < need {
        return Err(Error::arg(format!(
            "series of length {} too short to embed: need at least {need} samples",
            x.len()
        )));
    }
    let first = (dim - 1) * lag;
    let count = x.len() - first - horizon;
    let mut inputs = Vec::with_capacity(count);
    let mut targets = Vec::with_capacity(count);
    for t in first..first + count {
        inputs.push((0..dim).map(|i| x[t - i * lag]).collect());
        targets.push(x[t + horizon]);
    }
    EmbeddedDataset::new(inputs, targets, dim, lag, horizon)
}

/// Contiguous, order-preserving train/test/validation split.
pub fn split(
    ds: &EmbeddedDataset,
    n_train: usize,
    n_test: usize,
    n_val: usize,
) -> Result<(EmbeddedDataset, EmbeddedDataset, EmbeddedDataset)> {
    let fits = n_train
        .checked_add(n_test)
        .and_then(|s| s.checked_add(n_val))
        .is_some_and(|s| s <= ds.len());
    if !fits {
        return Err(Error::arg(format!(
            "split {n_train}+{n_test}+{n_val} exceeds dataset of {} pairs",
            ds.len()
        )));
    }
    Ok((
        ds.range(0, n_train),
        ds.range(n_train, n_train + n_test),
        ds.range(n_train + n_test, n_train + n_test + n_val),
    ))
}
