//! Derivatives of the adaptive-network outputs with respect to the kernel scales.

use serde::{Deserialize, Serialize};

use super::{loss_grad_a, loss_grad_o, NeighborCache};
use crate::belpm::{cm_combine, cm_punishment_phase2, lo_punishment, th_forward, BelpmModel, LayerTrace};
use crate::error::{Error, Result};
use crate::kernels::Kernel;

/// `∂output/∂b_m = K'(d_m; b_m) (v_m − output) / Σ K`, zero for every rank when
/// the uniform fallback was used.
pub fn layer_grad_b(kernel: &Kernel, trace: &LayerTrace, b: &[f64]) -> Result<Vec<f64>> {
    let k = trace.n1.len();
    if b.len() != k {
        return Err(Error::arg(format!("expected {k} kernel scales, got {}", b.len())));
    }
    if trace.degenerate {
        return Ok(vec![0.0; k]);
    }
    let sum = trace.weight_sum();
    trace
        .neighbors
        .distances
        .iter()
        .zip(b)
        .zip(&trace.values)
        .map(|((&d, &b), &v)| Ok(kernel.grad_b(d, b)? * (v - trace.output) / sum))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase1Gradients {
    pub loss_a: f64,
    pub loss_o: f64,
    pub grad_a: Vec<f64>,
    pub grad_o: Vec<f64>,
}

/// Batch losses `½Σp_a²`, `½Σp_o²` over the training set and their gradients in
/// `b_a` and `b_o`, with the model's linear weights and stored `p_a_e` held fixed.
pub fn phase1_gradients(model: &BelpmModel) -> Result<Phase1Gradients> {
    let cache = NeighborCache::training(model)?;
    let (loss_a, grad_a) = loss_grad_a(model, &cache, &model.b_a, true)?;
    let (loss_o, grad_o) = loss_grad_o(model, &cache, &model.b_o, true)?;
    Ok(Phase1Gradients { loss_a, loss_o, grad_a, grad_o })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase2Gradients {
    pub r: f64,
    pub p_a: f64,
    pub p_o: f64,
    /// `∂(½p_a²)/∂b_a` with `p_a = r − r_a`.
    pub grad_a: Vec<f64>,
    /// `∂(½p_o²)/∂b_o`.
    pub grad_o: Vec<f64>,
}

pub(crate) fn phase2_from_traces(model: &BelpmModel, bl: &LayerTrace, mo: &LayerTrace) -> Result<Phase2Gradients> {
    let r = cm_combine(bl.output, mo.output, &model.w);
    let p_a = cm_punishment_phase2(r, bl.output);
    let p_o = lo_punishment(mo.output, &model.w_o);
    let dp_a = model.w[0] - 1.0;
    let grad_a = layer_grad_b(&model.kernel, bl, &model.b_a)?.into_iter().map(|d| p_a * dp_a * d).collect();
    let grad_o = layer_grad_b(&model.kernel, mo, &model.b_o)?
        .into_iter()
        .map(|d| p_o * model.w_o[0] * d)
        .collect();
    Ok(Phase2Gradients { r, p_a, p_o, grad_a, grad_o })
}

/// Single-sample phase-2 punishments and gradients for an unseen input.
pub fn phase2_gradients(model: &BelpmModel, input: &[f64]) -> Result<Phase2Gradients> {
    let th = th_forward(input);
    let bl = model.bl_forward(&th.agg, &th.max_min, None)?;
    let mo = model.mo_forward(&th.agg, None)?;
    phase2_from_traces(model, &bl, &mo)
}
