//! The BELPM network: forward pass and persistence.
//!
//! A query flows through four parts:
//!
//! * **TH** extracts `[max, min]` of the input and passes the input on unchanged.
//! * **CX** is the identity map; its output `s` is what the memories compare.
//! * **AMYG/BL** finds the `k_a` training samples nearest under
//!   `‖s_j − s_q‖ + ‖th_j − th_q‖` and returns the kernel-weighted average of
//!   their targets, the primary response `r_a`.
//! * **ORBI/MO** finds the `k_o` samples nearest under `‖s_j − s_q‖` and returns
//!   the kernel-weighted average of their stored expected punishments
//!   `p_a^e = r_u − r_a`, the secondary response `r_o`.
//!
//! **AMYG/CM** combines the two as `r = w₁ r_a + w₂ r_o + w₃`.
//!
//! Kernel scales are attached to neighbor ranks: `b_a[m]` scales the m-th
//! nearest BL neighbor, whichever training sample that is.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{Kernel, EPS};
use crate::series::EmbeddedDataset;
use crate::wknn::{euclidean, nearest_by, NeighborSet};

pub const MODEL_FORMAT: &str = "belpm-model/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThOutput {
    pub max_min: [f64; 2],
    pub agg: Vec<f64>,
}

pub fn th_forward(input: &[f64]) -> ThOutput {
    let max = input.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = input.iter().copied().fold(f64::INFINITY, f64::min);
    ThOutput { max_min: [max, min], agg: input.to_vec() }
}

/// The sensory cortex passes its input through unchanged.
pub fn cx_forward(agg: &[f64]) -> Vec<f64> {
    agg.to_vec()
}

pub fn bl_distance(s_q: &[f64], th_q: &[f64; 2], s_j: &[f64], th_j: &[f64; 2]) -> f64 {
    euclidean(s_j, s_q) + euclidean(th_j, th_q)
}

pub fn mo_distance(s_q: &[f64], s_j: &[f64]) -> f64 {
    euclidean(s_j, s_q)
}

pub fn cm_combine(r_a: f64, r_o: f64, w: &[f64; 3]) -> f64 {
    w[0] * r_a + w[1] * r_o + w[2]
}

/// Punishment while the target is known.
pub fn cm_punishment_phase1(r_u: f64, r_a: f64, w_a: &[f64; 3]) -> f64 {
    w_a[0] * r_u + w_a[1] * r_a + w_a[2]
}

/// Weights used once the target is unavailable and the model's own output stands in for it.
pub const PHASE2_PUNISHMENT_WEIGHTS: [f64; 3] = [1.0, -1.0, 0.0];

pub fn cm_punishment_phase2(r: f64, r_a: f64) -> f64 {
    cm_punishment_phase1(r, r_a, &PHASE2_PUNISHMENT_WEIGHTS)
}

pub fn lo_punishment(r_o: f64, w_o: &[f64; 2]) -> f64 {
    w_o[0] * r_o + w_o[1]
}

/// What the stored training samples look like after TH and CX.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMemory {
    pub s_u: Vec<Vec<f64>>,
    pub th_u: Vec<[f64; 2]>,
    pub r_u: Vec<f64>,
    pub p_a_e: Vec<f64>,
}

impl TrainingMemory {
    pub fn from_dataset(ds: &EmbeddedDataset) -> Self {
        let (s_u, th_u) = ds
            .inputs
            .iter()
            .map(|i| {
                let th = th_forward(i);
                (cx_forward(&th.agg), th.max_min)
            })
            .unzip();
        Self { s_u, th_u, r_u: ds.targets.clone(), p_a_e: vec![0.0; ds.len()] }
    }

    pub fn len(&self) -> usize {
        self.r_u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r_u.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.s_u.first().map_or(0, Vec::len)
    }
}

/// Outputs of one four-layer adaptive network (BL or MO).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerTrace {
    pub neighbors: NeighborSet,
    /// Kernel outputs.
    pub n1: Vec<f64>,
    /// Normalized kernel outputs.
    pub n2: Vec<f64>,
    /// Normalized weights times the neighbor values.
    pub n3: Vec<f64>,
    /// The neighbor values being averaged (targets for BL, expected punishments for MO).
    pub values: Vec<f64>,
    pub output: f64,
    /// Set when the kernel weights vanished and uniform weights were used.
    pub degenerate: bool,
}

impl LayerTrace {
    pub fn weight_sum(&self) -> f64 {
        self.n1.iter().sum()
    }
}

fn adaptive_layers(kernel: &Kernel, neighbors: NeighborSet, b: &[f64], values: Vec<f64>) -> Result<LayerTrace> {
    let n1 = kernel.weights(&neighbors.distances, b)?;
    let sum: f64 = n1.iter().sum();
    let degenerate = !(sum >= EPS) || !sum.is_finite();
    let n2: Vec<f64> = if degenerate {
        vec![1.0 / n1.len() as f64; n1.len()]
    } else {
        n1.iter().map(|w| w / sum).collect()
    };
    let n3: Vec<f64> = n2.iter().zip(&values).map(|(w, v)| w * v).collect();
    let output = n3.iter().sum();
    Ok(LayerTrace { neighbors, n1, n2, n3, values, output, degenerate })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardTrace {
    pub th: ThOutput,
    pub s: Vec<f64>,
    pub bl: LayerTrace,
    pub mo: LayerTrace,
    pub r_a: f64,
    pub r_o: f64,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BelpmModel {
    pub format: String,
    pub memory: TrainingMemory,
    pub k_a: usize,
    pub k_o: usize,
    pub kernel: Kernel,
    pub b_a: Vec<f64>,
    pub b_o: Vec<f64>,
    pub w: [f64; 3],
    pub w_a: [f64; 3],
    pub w_o: [f64; 2],
    /// Embedding the memory was built with, kept so callers can rebuild queries.
    pub lag: usize,
    pub horizon: usize,
}

impl BelpmModel {
    /// Stores the training set and sets every kernel scale to 1. The expected
    /// punishments are computed immediately so the model can predict.
    pub fn new(train: &EmbeddedDataset, k_a: usize, k_o: usize, kernel: Kernel) -> Result<Self> {
        let n = train.len();
        if k_a == 0 || k_o == 0 {
            return Err(Error::arg("k_a and k_o must be at least 1"));
        }
        if k_a + 1 > n || k_o + 1 > n {
            return Err(Error::arg(format!(
                "k_a = {k_a} and k_o = {k_o} need at least {} training pairs, got {n}",
                k_a.max(k_o) + 1
            )));
        }
        let mut model = Self {
            format: MODEL_FORMAT.to_string(),
            memory: TrainingMemory::from_dataset(train),
            k_a,
            k_o,
            kernel,
            b_a: vec![1.0; k_a],
            b_o: vec![1.0; k_o],
            w: [1.0, 0.0, 0.0],
            w_a: [1.0, -1.0, 0.0],
            w_o: [1.0, 0.0],
            lag: train.lag,
            horizon: train.horizon,
        };
        model.memory.p_a_e = compute_expected_punishments(&model)?;
        Ok(model)
    }

    pub fn dim(&self) -> usize {
        self.memory.dim()
    }

    /// Learnable parameters: both scale vectors plus the eight linear weights.
    pub fn parameter_count(&self) -> usize {
        self.b_a.len() + self.b_o.len() + self.w.len() + self.w_a.len() + self.w_o.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != MODEL_FORMAT {
            return Err(Error::arg(format!(
                "unsupported model format `{}` (expected `{MODEL_FORMAT}`)",
                self.format
            )));
        }
        let n = self.memory.len();
        let m = &self.memory;
        if m.s_u.len() != n || m.th_u.len() != n || m.p_a_e.len() != n {
            return Err(Error::arg("training memory lists differ in length"));
        }
        if self.k_a == 0 || self.k_o == 0 || self.k_a + 1 > n || self.k_o + 1 > n {
            return Err(Error::arg(format!(
                "neighbor counts k_a = {}, k_o = {} invalid for {n} stored samples",
                self.k_a, self.k_o
            )));
        }
        if self.b_a.len() != self.k_a || self.b_o.len() != self.k_o {
            return Err(Error::arg("kernel parameter vectors do not match neighbor counts"));
        }
        let finite = self
            .b_a
            .iter()
            .chain(&self.b_o)
            .chain(&self.w)
            .chain(&self.w_a)
            .chain(&self.w_o)
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Numeric("model holds non-finite parameters".into()));
        }
        Ok(())
    }

    fn check_query(&self, s_q: &[f64]) -> Result<()> {
        if s_q.len() != self.dim() {
            return Err(Error::arg(format!(
                "query has dimension {} but the model was trained on {}",
                s_q.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    pub fn bl_neighbors(&self, s_q: &[f64], th_q: &[f64; 2], exclude: Option<usize>) -> Result<NeighborSet> {
        self.check_query(s_q)?;
        let m = &self.memory;
        nearest_by(m.len(), self.k_a, exclude, |j| bl_distance(s_q, th_q, &m.s_u[j], &m.th_u[j]))
    }

    pub fn mo_neighbors(&self, s_q: &[f64], exclude: Option<usize>) -> Result<NeighborSet> {
        self.check_query(s_q)?;
        let m = &self.memory;
        nearest_by(m.len(), self.k_o, exclude, |j| mo_distance(s_q, &m.s_u[j]))
    }

    /// BL layers over a precomputed neighbor set.
    pub fn bl_layers(&self, neighbors: NeighborSet, b_a: &[f64]) -> Result<LayerTrace> {
        let values = neighbors.indices.iter().map(|&j| self.memory.r_u[j]).collect();
        adaptive_layers(&self.kernel, neighbors, b_a, values)
    }

    /// MO layers over a precomputed neighbor set, averaging `p_a_e`.
    pub fn mo_layers(&self, neighbors: NeighborSet, b_o: &[f64], p_a_e: &[f64]) -> Result<LayerTrace> {
        let values = neighbors.indices.iter().map(|&j| p_a_e[j]).collect();
        adaptive_layers(&self.kernel, neighbors, b_o, values)
    }

    pub fn bl_forward(&self, s_q: &[f64], th_q: &[f64; 2], exclude: Option<usize>) -> Result<LayerTrace> {
        let nb = self.bl_neighbors(s_q, th_q, exclude)?;
        self.bl_layers(nb, &self.b_a)
    }

    pub fn mo_forward(&self, s_q: &[f64], exclude: Option<usize>) -> Result<LayerTrace> {
        let nb = self.mo_neighbors(s_q, exclude)?;
        self.mo_layers(nb, &self.b_o, &self.memory.p_a_e)
    }

    /// Full response for an unseen input, with every intermediate kept.
    pub fn predict_traced(&self, input: &[f64]) -> Result<ForwardTrace> {
        self.forward(input, None)
    }

    /// Response for training sample `j` with `j` removed from both memories.
    pub fn forward_loo(&self, j: usize) -> Result<ForwardTrace> {
        let input = self.memory.s_u[j].clone();
        self.forward(&input, Some(j))
    }

    fn forward(&self, input: &[f64], exclude: Option<usize>) -> Result<ForwardTrace> {
        if input.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("input contains non-finite values"));
        }
        let th = th_forward(input);
        let s = cx_forward(&th.agg);
        let bl = self.bl_forward(&s, &th.max_min, exclude)?;
        let mo = self.mo_forward(&s, exclude)?;
        let (r_a, r_o) = (bl.output, mo.output);
        let r = cm_combine(r_a, r_o, &self.w);
        Ok(ForwardTrace { th, s, bl, mo, r_a, r_o, r })
    }

    pub fn predict(&self, input: &[f64]) -> Result<f64> {
        Ok(self.predict_traced(input)?.r)
    }

    pub fn predict_all(&self, inputs: &[Vec<f64>]) -> Result<Vec<f64>> {
        use rayon::prelude::*;
        inputs.par_iter().map(|i| self.predict(i)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: BelpmModel = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Leave-one-out residual `r_u[j] − r_a[j]` of BL for every stored sample.
pub fn compute_expected_punishments(model: &BelpmModel) -> Result<Vec<f64>> {
    let m = &model.memory;
    if m.len() <= model.k_a {
        return Err(Error::arg(format!(
            "{} stored samples cannot support leave-one-out with k_a = {}",
            m.len(),
            model.k_a
        )));
    }
    (0..m.len())
        .map(|j| {
            let bl = model.bl_forward(&m.s_u[j], &m.th_u[j], Some(j))?;
            Ok(m.r_u[j] - bl.output)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(inputs: Vec<Vec<f64>>, targets: Vec<f64>) -> EmbeddedDataset {
        let dim = inputs[0].len();
        EmbeddedDataset::new(inputs, targets, dim, 1, 1).unwrap()
    }

    #[test]
    fn th_examples() {
        let t = th_forward(&[3.0, 1.0, 2.0]);
        assert_eq!(t.max_min, [3.0, 1.0]);
        assert_eq!(t.agg, vec![3.0, 1.0, 2.0]);
        assert_eq!(th_forward(&[5.0]).max_min, [5.0, 5.0]);
        assert_eq!(th_forward(&[-1.0, -1.0]).max_min, [-1.0, -1.0]);
    }

    #[test]
    fn cx_is_identity() {
        assert_eq!(cx_forward(&[1.0, 2.0, 3.0]), vec![1.0, 2.0, 3.0]);
        assert_eq!(cx_forward(&[0.0]), vec![0.0]);
    }

    #[test]
    fn bl_distance_examples() {
        let s = [1.0, 2.0];
        let th = [2.0, 1.0];
        assert_eq!(bl_distance(&s, &th, &s, &th), 0.0);
        assert_eq!(bl_distance(&s, &th, &[2.0, 2.0], &th), 1.0);
        assert_eq!(bl_distance(&s, &th, &s, &[5.0, 5.0]), 5.0);
    }

    #[test]
    fn cm_and_lo_nodes() {
        assert_eq!(cm_combine(2.0, 9.0, &[1.0, 0.0, 0.0]), 2.0);
        assert_eq!(cm_combine(2.0, 4.0, &[0.5, 0.5, 0.0]), 3.0);
        assert_eq!(cm_combine(2.0, 4.0, &[0.0, 0.0, 7.0]), 7.0);

        assert_eq!(cm_punishment_phase1(3.0, 1.0, &[1.0, -1.0, 0.0]), 2.0);
        assert_eq!(cm_punishment_phase1(3.0, 1.0, &[0.0, 0.0, 0.0]), 0.0);
        assert_eq!(cm_punishment_phase1(1.5, 1.5, &[1.0, -1.0, 0.0]), 0.0);

        assert_eq!(cm_punishment_phase2(1.0, 1.0), 0.0);
        assert_eq!(cm_punishment_phase2(3.0, 1.0), 2.0);
        assert_eq!(cm_punishment_phase2(1.0, 3.0), -2.0);

        assert_eq!(lo_punishment(2.5, &[1.0, 0.0]), 2.5);
        assert_eq!(lo_punishment(2.5, &[0.0, 4.0]), 4.0);
        assert_eq!(lo_punishment(2.0, &[0.5, 1.0]), 2.0);
    }

    #[test]
    fn zero_scales_average_uniformly() {
        let d = ds(vec![vec![0.0], vec![1.0], vec![3.0], vec![10.0]], vec![1.0, 2.0, 6.0, 50.0]);
        let mut m = BelpmModel::new(&d, 2, 2, Kernel::Exponential).unwrap();
        m.b_a = vec![0.0, 0.0];
        let bl = m.bl_forward(&[0.4], &[0.4, 0.4], None).unwrap();
        assert_eq!(bl.neighbors.indices, vec![0, 1]);
        assert!((bl.output - 1.5).abs() < 1e-12);
        assert!((bl.n2.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_neighbor_returns_its_target() {
        let d = ds(vec![vec![0.0], vec![1.0], vec![3.0]], vec![1.0, 2.0, 6.0]);
        let m = BelpmModel::new(&d, 1, 1, Kernel::Exponential).unwrap();
        let bl = m.bl_forward(&[2.9], &[2.9, 2.9], None).unwrap();
        assert_eq!(bl.output, 6.0);
    }

    #[test]
    fn constant_targets_have_no_punishment() {
        let inputs: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, (i * i) as f64 * 0.1]).collect();
        let d = ds(inputs, vec![4.0; 8]);
        let m = BelpmModel::new(&d, 3, 2, Kernel::Exponential).unwrap();
        assert!(m.memory.p_a_e.iter().all(|p| p.abs() < 1e-12));
        let tr = m.predict_traced(&[2.5, 0.7]).unwrap();
        assert!(tr.r_o.abs() < 1e-12);
        assert!((tr.r - 4.0).abs() < 1e-12);
    }

    #[test]
    fn mo_single_neighbor_returns_its_punishment() {
        let d = ds(vec![vec![0.0], vec![1.0], vec![3.0], vec![4.0]], vec![0.0, 5.0, 1.0, 2.0]);
        let mut m = BelpmModel::new(&d, 1, 1, Kernel::Exponential).unwrap();
        m.memory.p_a_e = vec![0.1, -0.2, 0.3, 0.7];
        let mo = m.mo_forward(&[2.8], None).unwrap();
        assert_eq!(mo.neighbors.indices, vec![2]);
        assert_eq!(mo.output, 0.3);
    }

    #[test]
    fn degenerate_weights_fall_back_to_uniform() {
        let d = ds(vec![vec![0.0], vec![1.0], vec![2.0]], vec![1.0, 3.0, 5.0]);
        let mut m = BelpmModel::new(&d, 2, 2, Kernel::Exponential).unwrap();
        m.b_a = vec![1e3, 1e3];
        let bl = m.bl_forward(&[100.0], &[100.0, 100.0], None).unwrap();
        assert!(bl.degenerate);
        assert!((bl.output - 4.0).abs() < 1e-12);
    }

    #[test]
    fn neighbor_counts_checked() {
        let d = ds(vec![vec![0.0], vec![1.0], vec![2.0]], vec![1.0, 3.0, 5.0]);
        assert!(BelpmModel::new(&d, 3, 1, Kernel::Exponential).is_err());
        assert!(BelpmModel::new(&d, 1, 3, Kernel::Exponential).is_err());
        assert!(BelpmModel::new(&d, 0, 1, Kernel::Exponential).is_err());
        let m = BelpmModel::new(&d, 2, 2, Kernel::Exponential).unwrap();
        assert!(m.predict(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn parameter_count_is_independent_of_dimension() {
        for dim in 1..5 {
            let inputs: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64; dim]).collect();
            let d = ds(inputs, (0..10).map(f64::from).collect());
            let m = BelpmModel::new(&d, 3, 6, Kernel::Exponential).unwrap();
            assert_eq!(m.parameter_count(), 3 + 6 + 8);
        }
    }

    #[test]
    fn json_round_trip_and_version_check() {
        let d = ds(vec![vec![0.0], vec![1.0], vec![2.0], vec![4.0]], vec![1.0, 3.0, 5.0, 2.0]);
        let m = BelpmModel::new(&d, 2, 2, Kernel::Rational { z: 1.5 }).unwrap();
        let text = m.to_json().unwrap();
        assert_eq!(BelpmModel::from_json(&text).unwrap(), m);
        let bad = text.replace(MODEL_FORMAT, "belpm-model/0");
        assert!(BelpmModel::from_json(&bad).is_err());
    }
}
