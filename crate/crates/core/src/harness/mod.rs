//! Metrics, benchmark experiments and report files.

pub mod experiment;
pub mod metrics;
pub mod report;

pub use experiment::{
    compare_structures, relative_spread, run_experiment, BaselineSpec, ExperimentReport, ExperimentSpec,
    HorizonResult, HorizonTiming, Metrics, StructureRow, System,
};
pub use metrics::{mse, nmse};
pub use report::{metrics_csv, structures_csv, write_report};
