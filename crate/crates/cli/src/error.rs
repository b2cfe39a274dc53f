use std::path::PathBuf;
use std::process::ExitCode;

use shmm_core::equivalence::{ConditionReport, EquivalenceError};
use shmm_core::format::FormatError;
use shmm_core::inference::InferenceError;
use shmm_core::model::ModelError;
use shmm_core::rle::RleError;
use shmm_core::validation::ValidationError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    NonMonotone(InferenceError),
    #[error("admissibility conditions failed:\n{0}")]
    ConditionViolation(Box<ConditionReport>),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Invalid(_) => 2,
            CliError::Io { .. } => 3,
            CliError::NonMonotone(_) => 5,
            CliError::ConditionViolation(_) => 6,
        })
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn invalid(context: impl std::fmt::Display, err: impl std::fmt::Display) -> Self {
        CliError::Invalid(format!("{context}: {err}"))
    }
}

impl From<InferenceError> for CliError {
    fn from(e: InferenceError) -> Self {
        match e {
            InferenceError::NonMonotoneLikelihood { .. } => CliError::NonMonotone(e),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl From<EquivalenceError> for CliError {
    fn from(e: EquivalenceError) -> Self {
        match e {
            EquivalenceError::ConditionViolation(report) => CliError::ConditionViolation(report),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<RleError> for CliError {
    fn from(e: RleError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<ValidationError> for CliError {
    fn from(e: ValidationError) -> Self {
        CliError::Invalid(e.to_string())
    }
}
