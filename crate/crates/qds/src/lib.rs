//! Configuration-driven experiments on quasistatic Pomeau–Manneville
//! systems, emitting CSV reports with run manifests.

pub mod config;
pub mod experiments;
pub mod report;

pub use config::{ConfigError, Experiment, ExperimentConfig, Setup};
pub use report::Report;
