//! Experiment configuration, execution and artifacts.

pub mod config;
pub mod plot;
pub mod run;

pub use config::{validate_config, validate_str, Experiment, ExperimentConfig, Mode};
pub use run::{prepare, run_experiment, run_suite, write_outputs, RunOutput, SuiteSummary, BUNDLED};
