//! TOML model configuration shared by `train` and `benchmark`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::learning::{BInit, Method, Mode, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub k_a: usize,
    pub k_o: usize,
    /// Kernel family name: gaussian, inversion, rank, exponential or rational.
    pub kernel: String,
    /// Exponent of the rational kernel.
    pub rational_z: f64,
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
}

impl Default for ModelConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            k_a: 5,
            k_o: 10,
            kernel: "exponential".into(),
            rational_z: 1.0,
            method: t.method,
            epochs: t.epochs,
            eta_a0: t.eta_a0,
            eta_o0: t.eta_o0,
            mode: t.mode,
            b_init: t.b_init,
            phase2_epochs: t.phase2_epochs,
            phase2_eta_a0: t.phase2_eta_a0,
            phase2_eta_o0: t.phase2_eta_o0,
            seed: t.seed,
        }
    }
}

impl ModelConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ModelConfig = toml::from_str(text)?;
        cfg.kernel()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn kernel(&self) -> Result<Kernel> {
        match self.kernel.parse::<Kernel>().map_err(|e| Error::Config(e.to_string()))? {
            Kernel::Rational { .. } => Kernel::rational(self.rational_z).map_err(|e| Error::Config(e.to_string())),
            k => Ok(k),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            method: self.method,
            epochs: self.epochs,
            eta_a0: self.eta_a0,
            eta_o0: self.eta_o0,
            mode: self.mode,
            b_init: self.b_init,
            phase2_epochs: self.phase2_epochs,
            phase2_eta_a0: self.phase2_eta_a0,
            phase2_eta_o0: self.phase2_eta_o0,
            seed: self.seed,
            record_b: false,
        }
    }
}
