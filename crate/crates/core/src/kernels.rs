//! Distance-to-weight kernels.
//!
//! `Exponential` and `Rational` take a per-node scale `b` and are the only
//! families with a derivative the trainer can use. The others are fixed shapes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Guard for the singular points of the inversion and rank kernels.
pub const EPS: f64 = 1e-12;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kernel {
    /// Unit-variance Gaussian density, `exp(-d²/2)/√(2π)`.
    Gaussian,
    /// `1/|d|`, clamped to `1/EPS` near zero.
    Inversion,
    /// `(max(d) - (d - min(d))) / max(d)` over the neighbor distances.
    Rank,
    /// `exp(-d·b)`.
    #[default]
    Exponential,
    /// `(1 + (d·b)²)^(-z)`.
    Rational { z: f64 },
}

impl Kernel {
    pub fn rational(z: f64) -> Result<Self> {
        if !(z > 0.0) || !z.is_finite() {
            return Err(Error::arg(format!("rational kernel exponent must be positive, got {z}")));
        }
        Ok(Kernel::Rational { z })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Kernel::Gaussian => "gaussian",
            Kernel::Inversion => "inversion",
            Kernel::Rank => "rank",
            Kernel::Exponential => "exponential",
            Kernel::Rational { .. } => "rational",
        }
    }

    /// Whether the kernel consumes a trainable scale `b`.
    pub fn is_parametric(&self) -> bool {
        matches!(self, Kernel::Exponential | Kernel::Rational { .. })
    }

    /// Whether evaluation needs the full set of neighbor distances.
    pub fn needs_context(&self) -> bool {
        matches!(self, Kernel::Rank)
    }

    /// Kernel value at distance `d`. `context` is the neighbor distance set and
    /// is required by `Rank`; it is ignored by every other family.
    pub fn eval(&self, d: f64, b: f64, context: Option<&[f64]>) -> Result<f64> {
        if !(d >= 0.0) {
            return Err(Error::arg(format!("distance must be non-negative, got {d}")));
        }
        Ok(match *self {
            Kernel::Gaussian => INV_SQRT_2PI * (-d * d / 2.0).exp(),
            Kernel::Inversion => 1.0 / d.max(EPS),
            Kernel::Rank => {
                let ctx = context
                    .filter(|c| !c.is_empty())
                    .ok_or_else(|| Error::arg("rank kernel needs the neighbor distance set"))?;
                let (min, max) = ctx
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
                if max < EPS {
                    1.0
                } else {
                    (max - (d - min)) / max
                }
            }
            Kernel::Exponential => (-d * b).exp(),
            Kernel::Rational { z } => (1.0 + (d * b).powi(2)).powf(-z),
        })
    }

    /// Weights for a whole neighbor set, node `m` using `b[m]` (or a single shared `b`).
    pub fn weights(&self, distances: &[f64], b: &[f64]) -> Result<Vec<f64>> {
        if !(b.len() == 1 || b.len() == distances.len()) && self.is_parametric() {
            return Err(Error::arg(format!(
                "{} kernel parameters for {} neighbors",
                b.len(),
                distances.len()
            )));
        }
        let pick = |m: usize| match b.len() {
            0 => 0.0,
            1 => b[0],
            _ => b[m],
        };
        distances
            .iter()
            .enumerate()
            .map(|(m, &d)| self.eval(d, pick(m), Some(distances)))
            .collect()
    }

    /// `∂K/∂b` at `(d, b)`.
    pub fn grad_b(&self, d: f64, b: f64) -> Result<f64> {
        match *self {
            Kernel::Exponential => Ok(-d * (-d * b).exp()),
            Kernel::Rational { z } => {
                let u = 1.0 + (d * b).powi(2);
                Ok(-2.0 * z * d * d * b * u.powf(-z - 1.0))
            }
            other => Err(Error::UnsupportedKernel(other.name())),
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::Rational { z } => write!(f, "rational(z={z})"),
            k => f.write_str(k.name()),
        }
    }
}

impl FromStr for Kernel {
    type Err = Error;

    /// Parses the config names; `rational` gets z = 1.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" => Ok(Kernel::Gaussian),
            "inversion" => Ok(Kernel::Inversion),
            "rank" => Ok(Kernel::Rank),
            "exponential" => Ok(Kernel::Exponential),
            "rational" => Ok(Kernel::Rational { z: 1.0 }),
            other => Err(Error::arg(format!(
                "unknown kernel `{other}` (expected gaussian|inversion|rank|exponential|rational)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelPropertyReport {
    pub non_negative: bool,
    pub max_at_zero: bool,
    pub non_increasing: bool,
    pub failures: Vec<String>,
}

impl KernelPropertyReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Checks non-negativity, maximum at zero and (when `monotone` is set)
/// non-increase across an ascending-sorted copy of `grid`.
pub fn check_properties<F>(k: F, grid: &[f64], monotone: bool) -> KernelPropertyReport
where
    F: Fn(f64) -> f64,
{
    let mut sorted: Vec<f64> = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let values: Vec<f64> = sorted.iter().map(|&d| k(d)).collect();
    let at_zero = k(0.0);
    let mut failures = Vec::new();

    let non_negative = values.iter().all(|&v| v >= 0.0) && at_zero >= 0.0;
    if !non_negative {
        failures.push("negative weight on grid".to_string());
    }
    let max_at_zero = values.iter().all(|&v| v <= at_zero);
    if !max_at_zero {
        failures.push("maximum at 0 violated".to_string());
    }
    let non_increasing = !monotone || values.windows(2).all(|w| w[1] <= w[0]);
    if !non_increasing {
        failures.push("not monotonically non-increasing".to_string());
    }
    KernelPropertyReport { non_negative, max_at_zero, non_increasing, failures }
}

pub fn check_kernel_properties(kernel: &Kernel, b: f64, grid: &[f64]) -> Result<KernelPropertyReport> {
    if grid.is_empty() || grid.iter().any(|&d| !(d >= 0.0)) {
        return Err(Error::arg("property grid must be non-empty and non-negative"));
    }
    // rank weights are evaluated against the grid itself as the neighbor set
    let k = |d: f64| kernel.eval(d, b, Some(grid)).unwrap_or(f64::NAN);
    let report = check_properties(k, grid, kernel.is_parametric() || kernel.needs_context());
    Ok(report)
}
