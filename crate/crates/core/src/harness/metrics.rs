//! Forecast error metrics.

use crate::error::{Error, Result};
use crate::kernels::EPS;

fn check_lengths(predicted: &[f64], target: &[f64]) -> Result<()> {
    if predicted.len() != target.len() {
        return Err(Error::arg(format!(
            "{} predictions but {} targets",
            predicted.len(),
            target.len()
        )));
    }
    Ok(())
}

fn squared_error(predicted: &[f64], target: &[f64]) -> f64 {
    predicted.iter().zip(target).map(|(p, y)| (y - p) * (y - p)).sum()
}

/// `Σ(y − ŷ)² / Σ(y − ȳ)²`.
pub fn nmse(predicted: &[f64], target: &[f64]) -> Result<f64> {
    check_lengths(predicted, target)?;
    if target.len() < 2 {
        return Err(Error::UndefinedMetric(format!("NMSE needs at least 2 samples, got {}", target.len())));
    }
    let mean = target.iter().sum::<f64>() / target.len() as f64;
    let spread: f64 = target.iter().map(|y| (y - mean) * (y - mean)).sum();
    if !(spread >= EPS) {
        return Err(Error::UndefinedMetric("NMSE of a constant target".into()));
    }
    Ok(squared_error(predicted, target) / spread)
}

pub fn mse(predicted: &[f64], target: &[f64]) -> Result<f64> {
    check_lengths(predicted, target)?;
    if target.is_empty() {
        return Err(Error::UndefinedMetric("MSE of an empty sequence".into()));
    }
    Ok(squared_error(predicted, target) / target.len() as f64)
}
