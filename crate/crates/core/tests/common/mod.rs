#![allow(dead_code)]

use belpm_core::series::{embed, generate_henon, EmbeddedDataset, HenonParams};
use belpm_core::{BelpmModel, Kernel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> EmbeddedDataset {
    let inputs = (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let targets = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    EmbeddedDataset::new(inputs, targets, dim, 1, 1).unwrap()
}

pub fn henon_dataset(n: usize, skip: usize, horizon: usize) -> EmbeddedDataset {
    let s = generate_henon(&HenonParams::default(), n + skip + 2 + horizon).unwrap();
    embed(&s.skip(skip).unwrap(), 3, 1, horizon).unwrap().range(0, n)
}

/// Small model with random scales and linear weights.
pub fn random_model(rng: &mut ChaCha8Rng, kernel: Kernel) -> BelpmModel {
    let n = rng.random_range(6..=20);
    let dim = rng.random_range(1..=4);
    let k_a = rng.random_range(1..=4);
    let k_o = rng.random_range(1..=4);
    let ds = random_dataset(rng, n, dim);
    let mut m = BelpmModel::new(&ds, k_a, k_o, kernel).unwrap();
    m.b_a = (0..k_a).map(|_| rng.random_range(0.2..3.0)).collect();
    m.b_o = (0..k_o).map(|_| rng.random_range(0.2..3.0)).collect();
    m.memory.p_a_e = belpm_core::belpm::compute_expected_punishments(&m).unwrap();
    m.w = [rng.random_range(0.5..1.5), rng.random_range(-1.0..1.0), rng.random_range(-0.5..0.5)];
    m.w_a = [rng.random_range(0.5..1.5), rng.random_range(-1.5..-0.5), rng.random_range(-0.2..0.2)];
    m.w_o = [rng.random_range(-1.5..1.5), rng.random_range(-0.2..0.2)];
    m
}

/// `|a − b| ≤ rel · max(|a|, |b|) + abs`.
pub fn close(a: f64, b: f64, rel: f64, abs: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) + abs
}
