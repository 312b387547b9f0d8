//! Two-phase training.
//!
//! Phase 1 alternates least-squares fits of the eight linear weights with
//! steepest descent on the kernel scales `b_a` and `b_o`, using
//! leave-one-out responses of the training set. Phase 2 keeps the linear
//! weights frozen and adapts the kernel scales online over an unlabeled
//! stream, with the model's own output standing in for the target.
//!
//! Losses are `½‖p_a‖²` and `½‖p_o‖²`. Neighbor sets do not depend on the
//! kernel scales, so they are searched once per training run and reused by
//! every epoch.

pub mod gradient;
pub mod lse;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::belpm::{cm_combine, cm_punishment_phase1, lo_punishment, th_forward, BelpmModel, LayerTrace};
use crate::error::{Error, Result};
use crate::harness::metrics::nmse;
use crate::kernels::EPS;
use crate::series::EmbeddedDataset;
use crate::wknn::{mean_rank_distances, NeighborSet};

pub use gradient::{layer_grad_b, phase1_gradients, phase2_gradients, Phase1Gradients, Phase2Gradients};
pub use lse::{lse_fit_w, lse_fit_wa, lse_fit_wo, LseFit};

/// Maximum step halvings tried before an SD step is rejected.
const MAX_BACKTRACK: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// Every parameter follows its gradient; LSE only initializes.
    #[serde(rename = "SD_ALL", alias = "sd_all")]
    SdAll,
    /// SD on the kernel scales; linear weights come from one LSE fit.
    #[serde(rename = "SD_NONLINEAR_LSE_INIT", alias = "sd_nonlinear_lse_init")]
    SdNonlinearLseInit,
    /// LSE on the linear weights; kernel scales stay at their heuristic values.
    #[serde(rename = "LSE_LINEAR_HEURISTIC_KERNEL", alias = "lse_linear_heuristic_kernel")]
    LseLinearHeuristicKernel,
    /// LSE then SD in every epoch.
    #[serde(rename = "HYBRID_SD_LSE", alias = "hybrid_sd_lse")]
    HybridSdLse,
}

impl Method {
    pub fn uses_sd(self) -> bool {
        !matches!(self, Method::LseLinearHeuristicKernel)
    }

    fn lse_each_epoch(self) -> bool {
        matches!(self, Method::LseLinearHeuristicKernel | Method::HybridSdLse)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Batch,
    Online,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BInit {
    Heuristic,
    Constant(f64),
}

impl fmt::Display for BInit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BInit::Heuristic => f.write_str("heuristic"),
            BInit::Constant(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for BInit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("heuristic") {
            return Ok(BInit::Heuristic);
        }
        let v = s.strip_prefix("constant:").unwrap_or(s);
        v.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite() && *v >= 0.0)
            .map(BInit::Constant)
            .ok_or_else(|| Error::Config(format!("b_init must be `heuristic` or a non-negative number, got `{s}`")))
    }
}

impl Serialize for BInit {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            BInit::Heuristic => s.serialize_str("heuristic"),
            BInit::Constant(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for BInit {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) if v.is_finite() && v >= 0.0 => Ok(BInit::Constant(v)),
            Raw::Num(v) => Err(serde::de::Error::custom(format!("b_init must be non-negative, got {v}"))),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub method: Method,
    pub epochs: usize,
    pub eta_a0: f64,
    pub eta_o0: f64,
    pub mode: Mode,
    pub b_init: BInit,
    pub phase2_epochs: usize,
    pub phase2_eta_a0: Option<f64>,
    pub phase2_eta_o0: Option<f64>,
    pub seed: u64,
    /// Keep per-epoch copies of `b_a` and `b_o` in the history.
    pub record_b: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            method: Method::HybridSdLse,
            epochs: 35,
            eta_a0: 0.05,
            eta_o0: 0.05,
            mode: Mode::Batch,
            b_init: BInit::Heuristic,
            phase2_epochs: 10,
            phase2_eta_a0: None,
            phase2_eta_o0: None,
            seed: 0,
            record_b: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, model: &BelpmModel) -> Result<()> {
        for (name, v) in [("eta_a0", self.eta_a0), ("eta_o0", self.eta_o0)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("phase2_eta_a0", self.phase2_eta_a0), ("phase2_eta_o0", self.phase2_eta_o0)] {
            if let Some(v) = v.filter(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if (self.method.uses_sd() || self.phase2_epochs > 0) && !model.kernel.is_parametric() {
            return Err(Error::Config(format!(
                "kernel `{}` has no trainable scale; use LSE_LINEAR_HEURISTIC_KERNEL with phase2_epochs = 0",
                model.kernel.name()
            )));
        }
        Ok(())
    }

    fn phase2_etas(&self) -> (f64, f64) {
        (self.phase2_eta_a0.unwrap_or(self.eta_a0), self.phase2_eta_o0.unwrap_or(self.eta_o0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss_a: f64,
    pub loss_o: f64,
    pub train_nmse: Option<f64>,
    pub val_nmse: Option<f64>,
    /// Step halvings taken by the line search on `b_a` and `b_o`.
    pub halvings: [usize; 2],
    /// Whether any LSE fit of this epoch took the ridge path.
    pub ridge: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_a: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_o: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LearningHistory {
    /// State after initialization (epoch 0).
    pub initial: Option<EpochRecord>,
    /// One record per phase-1 epoch.
    pub epochs: Vec<EpochRecord>,
    pub events: Vec<String>,
}

impl LearningHistory {
    /// Plot-ready CSV, initialization included as epoch 0.
    pub fn to_csv(&self) -> String {
        let fmt = |v: Option<f64>| v.map(|v| format!("{v}")).unwrap_or_default();
        let mut out = String::from("epoch,loss_a,loss_o,train_nmse,val_nmse\n");
        for r in self.initial.iter().chain(&self.epochs) {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.epoch,
                r.loss_a,
                r.loss_o,
                fmt(r.train_nmse),
                fmt(r.val_nmse)
            ));
        }
        out
    }

    /// Fraction of epochs whose `loss_a` did not exceed the previous epoch's.
    pub fn loss_a_non_increasing_fraction(&self) -> f64 {
        let losses: Vec<f64> = self.initial.iter().chain(&self.epochs).map(|r| r.loss_a).collect();
        if losses.len() < 2 {
            return 1.0;
        }
        let ok = losses.windows(2).filter(|w| w[1] <= w[0]).count();
        ok as f64 / (losses.len() - 1) as f64
    }
}

/// Per-sample responses over the training set.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchResponses {
    pub r_a: Vec<f64>,
    pub r_o: Vec<f64>,
    pub r: Vec<f64>,
}

/// Neighbor sets for a batch of queries, searched once.
#[derive(Debug, Clone)]
pub(crate) struct NeighborCache {
    pub bl: Vec<NeighborSet>,
    pub mo: Vec<NeighborSet>,
}

impl NeighborCache {
    /// Leave-one-out neighbors of every stored training sample.
    pub fn training(model: &BelpmModel) -> Result<Self> {
        let m = &model.memory;
        let pairs: Result<Vec<(NeighborSet, NeighborSet)>> = (0..m.len())
            .into_par_iter()
            .map(|j| {
                Ok((
                    model.bl_neighbors(&m.s_u[j], &m.th_u[j], Some(j))?,
                    model.mo_neighbors(&m.s_u[j], Some(j))?,
                ))
            })
            .collect();
        let (bl, mo) = pairs?.into_iter().unzip();
        Ok(Self { bl, mo })
    }

    /// Neighbors of unseen inputs, no exclusion.
    pub fn queries(model: &BelpmModel, inputs: &[Vec<f64>]) -> Result<Self> {
        let pairs: Result<Vec<(NeighborSet, NeighborSet)>> = inputs
            .par_iter()
            .map(|input| {
                let th = th_forward(input);
                Ok((model.bl_neighbors(&th.agg, &th.max_min, None)?, model.mo_neighbors(&th.agg, None)?))
            })
            .collect();
        let (bl, mo) = pairs?.into_iter().unzip();
        Ok(Self { bl, mo })
    }

    pub fn len(&self) -> usize {
        self.bl.len()
    }
}

fn bl_traces(model: &BelpmModel, cache: &NeighborCache, b_a: &[f64]) -> Result<Vec<LayerTrace>> {
    cache.bl.iter().map(|nb| model.bl_layers(nb.clone(), b_a)).collect()
}

fn mo_traces(model: &BelpmModel, cache: &NeighborCache, b_o: &[f64]) -> Result<Vec<LayerTrace>> {
    cache.mo.iter().map(|nb| model.mo_layers(nb.clone(), b_o, &model.memory.p_a_e)).collect()
}

/// Leave-one-out responses over the training set; refreshes `p_a_e` from the
/// BL residuals before MO runs.
pub(crate) fn cached_responses(model: &mut BelpmModel, cache: &NeighborCache) -> Result<BatchResponses> {
    let r_a: Vec<f64> = bl_traces(model, cache, &model.b_a)?.iter().map(|t| t.output).collect();
    model.memory.p_a_e = model.memory.r_u.iter().zip(&r_a).map(|(u, a)| u - a).collect();
    let r_o: Vec<f64> = mo_traces(model, cache, &model.b_o)?.iter().map(|t| t.output).collect();
    let r = r_a.iter().zip(&r_o).map(|(&a, &o)| cm_combine(a, o, &model.w)).collect();
    Ok(BatchResponses { r_a, r_o, r })
}

/// Responses of unseen queries with the stored expected punishments.
pub(crate) fn cached_predictions(model: &BelpmModel, cache: &NeighborCache) -> Result<Vec<f64>> {
    let bl = bl_traces(model, cache, &model.b_a)?;
    let mo = mo_traces(model, cache, &model.b_o)?;
    Ok(bl.iter().zip(&mo).map(|(a, o)| cm_combine(a.output, o.output, &model.w)).collect())
}

/// Leave-one-out `r_a`, refreshed `p_a_e`, then `r_o` and `r` for every training sample.
pub fn batch_responses(model: &mut BelpmModel) -> Result<BatchResponses> {
    let cache = NeighborCache::training(model)?;
    cached_responses(model, &cache)
}

/// Kernel scales `1 / mean distance to the m-th nearest other training sample`,
/// under the BL distance for `b_a` and the CX distance for `b_o`.
pub fn heuristic_b_init(model: &BelpmModel) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = &model.memory;
    let bl = mean_rank_distances(m.len(), model.k_a, |q, j| {
        crate::belpm::bl_distance(&m.s_u[q], &m.th_u[q], &m.s_u[j], &m.th_u[j])
    })?;
    let mo = mean_rank_distances(m.len(), model.k_o, |q, j| crate::belpm::mo_distance(&m.s_u[q], &m.s_u[j]))?;
    let inv = |v: Vec<f64>| v.into_iter().map(|d| 1.0 / (d + EPS)).collect();
    Ok((inv(bl), inv(mo)))
}

fn loss_grad_a(model: &BelpmModel, cache: &NeighborCache, b_a: &[f64], with_grad: bool) -> Result<(f64, Vec<f64>)> {
    let mut loss = 0.0;
    let mut grad = vec![0.0; b_a.len()];
    for (j, nb) in cache.bl.iter().enumerate() {
        let tr = model.bl_layers(nb.clone(), b_a)?;
        let p = cm_punishment_phase1(model.memory.r_u[j], tr.output, &model.w_a);
        loss += 0.5 * p * p;
        if with_grad {
            for (g, d) in grad.iter_mut().zip(layer_grad_b(&model.kernel, &tr, b_a)?) {
                *g += p * model.w_a[1] * d;
            }
        }
    }
    Ok((loss, grad))
}

fn loss_grad_o(model: &BelpmModel, cache: &NeighborCache, b_o: &[f64], with_grad: bool) -> Result<(f64, Vec<f64>)> {
    let mut loss = 0.0;
    let mut grad = vec![0.0; b_o.len()];
    for nb in &cache.mo {
        let tr = model.mo_layers(nb.clone(), b_o, &model.memory.p_a_e)?;
        let p = lo_punishment(tr.output, &model.w_o);
        loss += 0.5 * p * p;
        if with_grad {
            for (g, d) in grad.iter_mut().zip(layer_grad_b(&model.kernel, &tr, b_o)?) {
                *g += p * model.w_o[0] * d;
            }
        }
    }
    Ok((loss, grad))
}

fn project(b: &mut [f64]) {
    for v in b {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// One plain steepest-descent step on both scale vectors, projected onto `b ≥ 0`.
pub fn sd_step(model: &BelpmModel, eta_a: f64, eta_o: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let g = phase1_gradients(model)?;
    if g.grad_a.iter().chain(&g.grad_o).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite kernel-scale gradient".into()));
    }
    let step = |b: &[f64], grad: &[f64], eta: f64| {
        let mut out: Vec<f64> = b.iter().zip(grad).map(|(b, g)| b - eta * g).collect();
        project(&mut out);
        out
    };
    Ok((step(&model.b_a, &g.grad_a, eta_a), step(&model.b_o, &g.grad_o, eta_o)))
}

/// Outcome of a line-searched descent step.
struct StepOutcome {
    halvings: usize,
}

/// Mutable learning-rate state shared across epochs.
struct RateState {
    scale_a: f64,
    scale_o: f64,
}

type LossFn<'a> = dyn Fn(&[f64], bool) -> Result<(f64, Vec<f64>)> + 'a;

/// Backtracking steepest descent: start at `eta` and halve until the loss does
/// not increase. A non-finite gradient rejects the step and halves `scale`.
fn descend(
    b: &mut Vec<f64>,
    loss_fn: &LossFn<'_>,
    eta0: f64,
    scale: &mut f64,
    n: usize,
    label: &str,
    events: &mut Vec<String>,
) -> Result<StepOutcome> {
    let (loss0, grad) = loss_fn(b, true)?;
    if grad.iter().any(|g| !g.is_finite()) || !loss0.is_finite() {
        *scale *= 0.5;
        events.push(format!("{label}: non-finite gradient, step rejected, rate halved"));
        return Ok(StepOutcome { halvings: 0 });
    }
    if grad.iter().all(|&g| g == 0.0) {
        return Ok(StepOutcome { halvings: 0 });
    }
    let mut eta = eta0 * *scale / (1.0 + 2.0 * loss0 / n.max(1) as f64);
    for halvings in 0..MAX_BACKTRACK {
        let mut cand: Vec<f64> = b.iter().zip(&grad).map(|(b, g)| b - eta * g).collect();
        project(&mut cand);
        let (loss1, _) = loss_fn(&cand, false)?;
        if loss1.is_finite() && loss1 <= loss0 {
            *b = cand;
            return Ok(StepOutcome { halvings });
        }
        eta *= 0.5;
    }
    events.push(format!("{label}: no descent after {MAX_BACKTRACK} halvings, step rejected"));
    Ok(StepOutcome { halvings: MAX_BACKTRACK })
}

/// Gradient descent on a least-squares objective, step `1 / tr(XᵀX)` (never
/// above the stability bound).
fn linear_sd<const P: usize>(coef: &mut [f64; P], rows: &[[f64; P]], y: &[f64]) {
    let trace: f64 = rows.iter().flat_map(|r| r.iter()).map(|v| v * v).sum();
    if !(trace > 0.0) {
        return;
    }
    let mut grad = [0.0; P];
    for (row, &t) in rows.iter().zip(y) {
        let res = row.iter().zip(coef.iter()).map(|(a, w)| a * w).sum::<f64>() - t;
        for p in 0..P {
            grad[p] += row[p] * res;
        }
    }
    if grad.iter().all(|g| g.is_finite()) {
        for p in 0..P {
            coef[p] -= grad[p] / trace;
        }
    }
}

struct Phase1<'a> {
    cfg: &'a TrainConfig,
    cache: NeighborCache,
    val: Option<(&'a EmbeddedDataset, NeighborCache)>,
    history: LearningHistory,
    rates: RateState,
}

impl Phase1<'_> {
    /// Refits all linear weights from the current responses. Returns whether a ridge path was taken.
    fn lse_fit(&self, model: &mut BelpmModel, resp: &BatchResponses) -> Result<bool> {
        let r_u = &model.memory.r_u;
        let w = lse_fit_w(&resp.r_a, &resp.r_o, r_u)?;
        let w_a = lse_fit_wa(r_u, &resp.r_a, &model.memory.p_a_e)?;
        let p_o_e: Vec<f64> = r_u.iter().zip(&resp.r).map(|(u, r)| u - r).collect();
        let w_o = lse_fit_wo(&resp.r_o, &p_o_e)?;
        model.w = w.coef;
        model.w_a = w_a.coef;
        model.w_o = w_o.coef;
        Ok(w.ridge || w_a.ridge || w_o.ridge)
    }

    fn linear_sd(&self, model: &mut BelpmModel, resp: &BatchResponses) {
        let r_u = model.memory.r_u.clone();
        let rows: Vec<[f64; 3]> = resp.r_a.iter().zip(&resp.r_o).map(|(&a, &o)| [a, o, 1.0]).collect();
        linear_sd(&mut model.w, &rows, &r_u);
        let rows: Vec<[f64; 3]> = r_u.iter().zip(&resp.r_a).map(|(&u, &a)| [u, a, 1.0]).collect();
        let p_a_e = model.memory.p_a_e.clone();
        linear_sd(&mut model.w_a, &rows, &p_a_e);
        let rows: Vec<[f64; 2]> = resp.r_o.iter().map(|&o| [o, 1.0]).collect();
        let p_o_e: Vec<f64> = r_u.iter().zip(&resp.r).map(|(u, r)| u - r).collect();
        linear_sd(&mut model.w_o, &rows, &p_o_e);
    }

    fn sd_batch(&mut self, model: &mut BelpmModel) -> Result<[usize; 2]> {
        let n = model.memory.len();
        let mut b_a = model.b_a.clone();
        let out_a = {
            let m: &BelpmModel = model;
            let cache = &self.cache;
            let f = |b: &[f64], g: bool| loss_grad_a(m, cache, b, g);
            descend(&mut b_a, &f, self.cfg.eta_a0, &mut self.rates.scale_a, n, "b_a", &mut self.history.events)?
        };
        model.b_a = b_a;
        let mut b_o = model.b_o.clone();
        let out_o = {
            let m: &BelpmModel = model;
            let cache = &self.cache;
            let f = |b: &[f64], g: bool| loss_grad_o(m, cache, b, g);
            descend(&mut b_o, &f, self.cfg.eta_o0, &mut self.rates.scale_o, n, "b_o", &mut self.history.events)?
        };
        model.b_o = b_o;
        Ok([out_a.halvings, out_o.halvings])
    }

    /// Per-sample steps in training order; `p_a_e` stays fixed for the epoch.
    fn sd_online(&mut self, model: &mut BelpmModel) -> Result<()> {
        for j in 0..model.memory.len() {
            let tr = model.bl_layers(self.cache.bl[j].clone(), &model.b_a)?;
            let p = cm_punishment_phase1(model.memory.r_u[j], tr.output, &model.w_a);
            let d = layer_grad_b(&model.kernel, &tr, &model.b_a)?;
            let eta = self.cfg.eta_a0 * self.rates.scale_a / (1.0 + p * p);
            apply_sample_step(&mut model.b_a, &d, p * model.w_a[1], eta, &mut self.rates.scale_a, "b_a", &mut self.history.events);

            let tr = model.mo_layers(self.cache.mo[j].clone(), &model.b_o, &model.memory.p_a_e)?;
            let p = lo_punishment(tr.output, &model.w_o);
            let d = layer_grad_b(&model.kernel, &tr, &model.b_o)?;
            let eta = self.cfg.eta_o0 * self.rates.scale_o / (1.0 + p * p);
            apply_sample_step(&mut model.b_o, &d, p * model.w_o[0], eta, &mut self.rates.scale_o, "b_o", &mut self.history.events);
        }
        Ok(())
    }

    fn record(&self, model: &mut BelpmModel, epoch: usize, halvings: [usize; 2], ridge: bool) -> Result<EpochRecord> {
        let resp = cached_responses(model, &self.cache)?;
        let (loss_a, _) = loss_grad_a(model, &self.cache, &model.b_a, false)?;
        let (loss_o, _) = loss_grad_o(model, &self.cache, &model.b_o, false)?;
        let train_nmse = nmse(&resp.r, &model.memory.r_u).ok();
        let val_nmse = match &self.val {
            Some((ds, cache)) => nmse(&cached_predictions(model, cache)?, &ds.targets).ok(),
            None => None,
        };
        let keep = self.cfg.record_b;
        Ok(EpochRecord {
            epoch,
            loss_a,
            loss_o,
            train_nmse,
            val_nmse,
            halvings,
            ridge,
            b_a: keep.then(|| model.b_a.clone()),
            b_o: keep.then(|| model.b_o.clone()),
        })
    }
}

fn apply_sample_step(
    b: &mut [f64],
    d_out: &[f64],
    factor: f64,
    eta: f64,
    scale: &mut f64,
    label: &str,
    events: &mut Vec<String>,
) {
    let grad: Vec<f64> = d_out.iter().map(|d| factor * d).collect();
    if grad.iter().any(|g| !g.is_finite()) || !eta.is_finite() {
        *scale *= 0.5;
        events.push(format!("{label}: non-finite gradient, step rejected, rate halved"));
        return;
    }
    for (v, g) in b.iter_mut().zip(grad) {
        *v -= eta * g;
    }
    project(b);
}

/// Phase-1 training of a model whose memory already holds the training set.
///
/// Initialization sets the kernel scales (`b_init`), computes leave-one-out
/// responses and fits all linear weights once. Each epoch then runs, in order:
/// leave-one-out responses, the linear-weight update of the chosen method, and
/// the kernel-scale update of the chosen method.
pub fn train_phase1(
    model: &mut BelpmModel,
    val: Option<&EmbeddedDataset>,
    cfg: &TrainConfig,
) -> Result<LearningHistory> {
    cfg.validate(model)?;
    model.validate()?;
    match cfg.b_init {
        BInit::Heuristic => {
            let (b_a, b_o) = heuristic_b_init(model)?;
            model.b_a = b_a;
            model.b_o = b_o;
        }
        BInit::Constant(v) => {
            model.b_a = vec![v; model.k_a];
            model.b_o = vec![v; model.k_o];
        }
    }
    let cache = NeighborCache::training(model)?;
    let val = match val.filter(|v| !v.is_empty()) {
        Some(ds) => Some((ds, NeighborCache::queries(model, &ds.inputs)?)),
        None => None,
    };
    let mut run = Phase1 {
        cfg,
        cache,
        val,
        history: LearningHistory::default(),
        rates: RateState { scale_a: 1.0, scale_o: 1.0 },
    };

    let resp = cached_responses(model, &run.cache)?;
    let ridge = run.lse_fit(model, &resp)?;
    run.history.initial = Some(run.record(model, 0, [0, 0], ridge)?);

    for epoch in 1..=cfg.epochs {
        let resp = cached_responses(model, &run.cache)?;
        let mut ridge = false;
        match cfg.method {
            m if m.lse_each_epoch() => ridge = run.lse_fit(model, &resp)?,
            Method::SdAll => run.linear_sd(model, &resp),
            _ => {}
        }
        let mut halvings = [0, 0];
        if cfg.method.uses_sd() {
            match cfg.mode {
                Mode::Batch => halvings = run.sd_batch(model)?,
                Mode::Online => run.sd_online(model)?,
            }
        }
        let rec = run.record(model, epoch, halvings, ridge)?;
        run.history.epochs.push(rec);
    }
    // leave the stored punishments consistent with the final scales
    cached_responses(model, &run.cache)?;
    Ok(run.history)
}

/// Result of online adaptation over a stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase2Trace {
    /// Predictions of the first pass, each made before the update it triggered,
    /// so sample `t` never depends on samples after it.
    pub predictions: Vec<f64>,
    /// NMSE of each pass's predictions against the stream targets, when defined.
    pub epoch_nmse: Vec<Option<f64>>,
    /// Running NMSE over the first pass, one entry per sample (undefined for the first samples).
    pub running_nmse: Vec<Option<f64>>,
    pub events: Vec<String>,
}

/// Online adaptation of the kernel scales over `stream`, linear weights frozen.
///
/// For every sample in order: predict, record, then step `b_a` on `½(r − r_a)²`
/// and `b_o` on `½(w_o1 r_o + w_o2)²`. Later passes repeat this over the same
/// stream and only refine the model. Targets are only used for the NMSE trace.
pub fn train_phase2(model: &mut BelpmModel, stream: &EmbeddedDataset, cfg: &TrainConfig) -> Result<Phase2Trace> {
    let mut trace = Phase2Trace {
        predictions: Vec::new(),
        epoch_nmse: Vec::new(),
        running_nmse: Vec::new(),
        events: Vec::new(),
    };
    if stream.is_empty() || cfg.phase2_epochs == 0 {
        return Ok(trace);
    }
    cfg.validate(model)?;
    let cache = NeighborCache::queries(model, &stream.inputs)?;
    let (eta_a0, eta_o0) = cfg.phase2_etas();
    let mut scale_a = 1.0;
    let mut scale_o = 1.0;
    for _ in 0..cfg.phase2_epochs {
        let mut preds = Vec::with_capacity(stream.len());
        for j in 0..cache.len() {
            let bl = model.bl_layers(cache.bl[j].clone(), &model.b_a)?;
            let mo = model.mo_layers(cache.mo[j].clone(), &model.b_o, &model.memory.p_a_e)?;
            let r = cm_combine(bl.output, mo.output, &model.w);
            preds.push(r);

            let g = gradient::phase2_from_traces(model, &bl, &mo)?;
            let eta = eta_a0 * scale_a / (1.0 + g.p_a * g.p_a);
            apply_sample_step(&mut model.b_a, &g.grad_a, 1.0, eta, &mut scale_a, "b_a", &mut trace.events);
            let eta = eta_o0 * scale_o / (1.0 + g.p_o * g.p_o);
            apply_sample_step(&mut model.b_o, &g.grad_o, 1.0, eta, &mut scale_o, "b_o", &mut trace.events);
        }
        trace.epoch_nmse.push(nmse(&preds, &stream.targets).ok());
        if trace.predictions.is_empty() {
            trace.predictions = preds;
        }
    }
    trace.running_nmse = (1..=stream.len())
        .map(|n| nmse(&trace.predictions[..n], &stream.targets[..n]).ok())
        .collect();
    Ok(trace)
}
