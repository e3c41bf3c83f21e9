//! Configuration parsing and experiment orchestration behind the `deadcore`
//! binary.

pub mod config;
pub mod run;

pub use config::{parse_config, ConfigError, Experiment, RunConfig};
pub use run::{run, Outcome, RunError, SCHEMA_VERSION};
