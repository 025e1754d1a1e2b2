//! Scenario runner for the `refldp` numerical laboratory: configuration
//! parsing, the instance registry, experiment orchestration and replay.

pub mod instances;
pub mod run;
pub mod scenario;

pub use run::{replay, run_scenario, RunOptions, RunOutcome};
pub use scenario::{Experiment, Scenario};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] refldp::Error),
    #[error("{path}: {source}")]
    Toml { path: String, source: toml::de::Error },
    #[error("{0}")]
    Config(String),
    #[error("unknown instance `{0}` (see `refldp list`)")]
    UnknownInstance(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Process exit codes.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_FAIL: i32 = 2;
