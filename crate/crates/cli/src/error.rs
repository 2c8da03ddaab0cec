use std::process::ExitCode;

use par_core::ParError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Estimation(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            Self::Usage(_) => 2,
            Self::Data(_) => 3,
            Self::Estimation(_) => 4,
        })
    }
}

impl From<ParError> for CliError {
    fn from(e: ParError) -> Self {
        let msg = e.to_string();
        match e {
            ParError::InvalidParams(_) | ParError::NonStationary { .. } | ParError::UnknownTable(_) => Self::Usage(msg),
            ParError::Data { .. }
            | ParError::Format(_)
            | ParError::Io(_)
            | ParError::Json(_)
            | ParError::Dimension(_) => Self::Data(msg),
            ParError::Domain { .. }
            | ParError::Singular(_)
            | ParError::Degenerate(_)
            | ParError::Estimation(_)
            | ParError::UndefinedMetric(_) => Self::Estimation(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::Data(e.to_string())
    }
}
