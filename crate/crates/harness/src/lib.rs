//! Experiment harness: JSON configs, runs, comparisons and reports on top of
//! `straggler-core`.

pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod output;
pub mod report;

pub use config::ExperimentConfig;
pub use error::HarnessError;
pub use experiment::{run_config, run_schemes, SchemeOutcome};
pub use report::{time_to_target, TraceColumn};
