//! Command-line shell around `tgf-core`: configuration, subcommands, output
//! files and checkpoint/resume.

pub mod commands;
pub mod config;
pub mod output;
pub mod suites;

use thiserror::Error;

use tgf_core::diagnostics::DiagnosticsError;
use tgf_core::measure::MeasureError;
use tgf_core::spectral::SpectralError;
use tgf_core::stepper::StepError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration at {path}: {message}")]
    Config { path: String, message: String },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("acceptance failure: {0}")]
    Acceptance(String),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Numerical(_) => 3,
            CliError::Acceptance(_) => 4,
            CliError::Io { .. } | CliError::Other(_) => 1,
        }
    }

    pub fn io(context: impl std::fmt::Display, source: std::io::Error) -> Self {
        CliError::Io { context: context.to_string(), source }
    }
}

impl From<StepError> for CliError {
    fn from(e: StepError) -> Self {
        match e {
            StepError::CflViolation { .. } | StepError::NonFinite { .. } => CliError::Numerical(e.to_string()),
            StepError::Io(source) => CliError::io("i/o", source),
            other => CliError::Other(other.to_string()),
        }
    }
}

impl From<SpectralError> for CliError {
    fn from(e: SpectralError) -> Self {
        CliError::from(StepError::from(e))
    }
}

impl From<DiagnosticsError> for CliError {
    fn from(e: DiagnosticsError) -> Self {
        match e {
            DiagnosticsError::Step(s) => s.into(),
            other => CliError::Other(other.to_string()),
        }
    }
}

impl From<MeasureError> for CliError {
    fn from(e: MeasureError) -> Self {
        match e {
            MeasureError::Step(s) => s.into(),
            other => CliError::Other(other.to_string()),
        }
    }
}
