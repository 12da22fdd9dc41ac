//! Batch runner for interface-lab experiments: config parsing, static
//! validation, dispatch to the core library and report writing.

pub mod config;
pub mod error;
pub mod run;
pub mod validate;

pub use config::{BridgeSampler, ExperimentConfig, ExperimentKind, Tolerances};
pub use error::CliError;
pub use run::{run, RunOutcome};
pub use validate::validate;

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "INTERFACE_LAB_THREADS";
/// Environment variable holding the output root directory.
pub const OUTPUT_ENV: &str = "INTERFACE_LAB_OUTPUT";
