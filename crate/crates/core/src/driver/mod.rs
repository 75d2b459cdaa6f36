//! Configuration, orchestration and file export.

pub mod config;
pub mod export;
pub mod render;
pub mod run;

pub use config::{parse_config, parse_str, ConfigError, ProblemSpec};
pub use run::{run, RunArtifacts, Summary};
