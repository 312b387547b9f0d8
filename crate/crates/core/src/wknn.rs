//! Weighted k-nearest-neighbor regression and the exact neighbor search it
//! shares with the BELPM network.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{Kernel, EPS};
use crate::series::EmbeddedDataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborSet {
    pub indices: Vec<usize>,
    pub distances: Vec<f64>,
}

impl NeighborSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn by_distance_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Exact linear scan over `n` candidates with a caller-supplied distance.
///
/// Returns the `k` closest candidates, ascending by distance with ties broken
/// by ascending index. `exclude` removes one candidate (leave-one-out).
pub fn nearest_by<F>(n: usize, k: usize, exclude: Option<usize>, mut dist: F) -> Result<NeighborSet>
where
    F: FnMut(usize) -> f64,
{
    let available = n - usize::from(exclude.is_some_and(|e| e < n));
    if k == 0 || k > available {
        return Err(Error::arg(format!(
            "k = {k} out of range: {available} candidate(s) available"
        )));
    }
    let mut all: Vec<(f64, usize)> = (0..n)
        .filter(|&j| Some(j) != exclude)
        .map(|j| (dist(j), j))
        .collect();
    if let Some(&(d, j)) = all.iter().find(|(d, _)| d.is_nan()) {
        return Err(Error::Numeric(format!("distance to sample {j} is {d}")));
    }
    if k < all.len() {
        all.select_nth_unstable_by(k - 1, by_distance_then_index);
        all.truncate(k);
    }
    all.sort_unstable_by(by_distance_then_index);
    Ok(NeighborSet {
        indices: all.iter().map(|p| p.1).collect(),
        distances: all.iter().map(|p| p.0).collect(),
    })
}

pub fn knn_search(
    query: &[f64],
    inputs: &[Vec<f64>],
    k: usize,
    exclude: Option<usize>,
) -> Result<NeighborSet> {
    if let Some(j) = inputs.iter().position(|v| v.len() != query.len()) {
        return Err(Error::arg(format!(
            "query has dimension {} but input {j} has {}",
            query.len(),
            inputs[j].len()
        )));
    }
    nearest_by(inputs.len(), k, exclude, |j| euclidean(query, &inputs[j]))
}

/// Kernel-weighted average of the neighbor targets.
pub(crate) fn weighted_average(weights: &[f64], targets: &[f64]) -> Result<f64> {
    let sum: f64 = weights.iter().sum();
    if !(sum >= EPS) {
        return Err(Error::DegenerateWeights { sum });
    }
    Ok(weights.iter().zip(targets).map(|(w, r)| w * r).sum::<f64>() / sum)
}

/// Predicts the target of `query` as `Σ K(d_j) r_j / Σ K(d_j)` over its `k`
/// nearest training pairs. `b` holds one shared scale or one per neighbor rank.
pub fn wknn_predict(
    query: &[f64],
    ds: &EmbeddedDataset,
    k: usize,
    kernel: &Kernel,
    b: &[f64],
) -> Result<f64> {
    if kernel.is_parametric() && !(b.len() == 1 || b.len() == k) {
        return Err(Error::arg(format!("expected 1 or {k} kernel parameters, got {}", b.len())));
    }
    let nb = knn_search(query, &ds.inputs, k, None)?;
    let weights = kernel.weights(&nb.distances, b)?;
    let targets: Vec<f64> = nb.indices.iter().map(|&j| ds.targets[j]).collect();
    weighted_average(&weights, &targets)
}

/// Mean distance to the m-th nearest other sample, for `m = 1..=k`, with each
/// training sample excluded from its own search.
pub fn mean_rank_distances<F>(n: usize, k: usize, mut dist: F) -> Result<Vec<f64>>
where
    F: FnMut(usize, usize) -> f64,
{
    let mut acc = vec![0.0; k];
    for q in 0..n {
        let nb = nearest_by(n, k, Some(q), |j| dist(q, j))?;
        for (a, d) in acc.iter_mut().zip(&nb.distances) {
            *a += d;
        }
    }
    Ok(acc.into_iter().map(|s| s / n as f64).collect())
}

/// Standalone weighted k-NN regressor used as the comparison baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WknnRegressor {
    pub train: EmbeddedDataset,
    pub k: usize,
    pub kernel: Kernel,
    pub b: Vec<f64>,
}

impl WknnRegressor {
    pub fn new(train: EmbeddedDataset, k: usize, kernel: Kernel, b: Vec<f64>) -> Result<Self> {
        if k == 0 || k > train.len() {
            return Err(Error::arg(format!("k = {k} out of range for {} training pairs", train.len())));
        }
        if kernel.is_parametric() && !(b.len() == 1 || b.len() == k) {
            return Err(Error::arg(format!("expected 1 or {k} kernel parameters, got {}", b.len())));
        }
        Ok(Self { train, k, kernel, b })
    }

    /// Scales each rank by the inverse of its mean leave-one-out neighbor distance.
    pub fn with_heuristic_b(train: EmbeddedDataset, k: usize, kernel: Kernel) -> Result<Self> {
        if train.len() <= k {
            return Err(Error::arg(format!(
                "heuristic scales need more than k = {k} training pairs, got {}",
                train.len()
            )));
        }
        let means = mean_rank_distances(train.len(), k, |q, j| euclidean(&train.inputs[q], &train.inputs[j]))?;
        let b = means.iter().map(|m| 1.0 / (m + EPS)).collect();
        Self::new(train, k, kernel, b)
    }

    pub fn predict(&self, query: &[f64]) -> Result<f64> {
        wknn_predict(query, &self.train, self.k, &self.kernel, &self.b)
    }

    pub fn predict_all(&self, queries: &[Vec<f64>]) -> Result<Vec<f64>> {
        use rayon::prelude::*;
        queries.par_iter().map(|q| self.predict(q)).collect()
    }
}
