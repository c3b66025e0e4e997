//! Configuration-driven runner: reads a JSON run description, executes one
//! experiment kind and writes a `run.json` manifest next to its outputs.

pub mod config;
pub mod error;
pub mod export;
pub mod manifest;
pub mod run;

pub use config::{emit, parse_config, parse_value, ExperimentKind, RunConfig};
pub use error::{CliError, Result};
pub use manifest::RunManifest;
pub use run::run;
