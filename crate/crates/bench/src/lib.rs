//! Experiment runner for the binary-weight regression solvers: TOML-configured
//! sweeps over noise levels or outlier fractions, a results CSV with per-run
//! and aggregate rows, and weight-trajectory histograms.

pub mod config;
pub mod error;
pub mod histogram;
pub mod metrics;
pub mod runner;

pub use config::ExperimentConfig;
pub use error::{BenchError, Result};
pub use runner::{run_experiment, MetricRow, Paths, RowKind};
