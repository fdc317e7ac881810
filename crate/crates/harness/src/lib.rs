//! IO, file formats, experiment orchestration, and reporting around
//! [`mia_core`].

pub mod checkpoint;
pub mod config;
pub mod dataio;
pub mod report;
pub mod scenario;

pub use config::ScenarioConfig;
pub use report::ExperimentReport;

/// Harness-level errors.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Core(#[from] mia_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
