//! Emotional-learning weighted k-NN forecaster for chaotic time series.
//!
//! The model keeps its training set as memory. Two kernel-weighted nearest
//! neighbor averages, one over targets and one over past residuals, are mixed
//! linearly into the forecast. Kernel scales are trained by steepest descent
//! and the linear weights by least squares, then the scales keep adapting
//! online once targets are no longer available.

pub mod belpm;
pub mod config;
pub mod error;
pub mod harness;
pub mod io;
pub mod kernels;
pub mod learning;
pub mod series;
pub mod wknn;

pub use belpm::BelpmModel;
pub use config::ModelConfig;
pub use error::{Error, Result};
pub use harness::{nmse, mse, run_experiment, ExperimentReport, ExperimentSpec};
pub use kernels::Kernel;
pub use learning::{train_phase1, train_phase2, LearningHistory, TrainConfig};
pub use series::{embed, split, EmbeddedDataset, TimeSeries};
pub use wknn::WknnRegressor;
