use serde::Serialize;
use stir_core::DataError;
use thiserror::Error;

/// One run that did not complete.
#[derive(Debug, Clone, Serialize)]
pub struct RunFailure {
    pub seed: u64,
    pub run: String,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{} of {total} runs failed", failures.len())]
    Runs { total: usize, failures: Vec<RunFailure> },
}

impl CliError {
    pub fn io(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::Data(DataError::InvalidParameter { .. }) => "invalid-parameter",
            CliError::Data(DataError::Parse { .. }) => "parse",
            CliError::Data(_) => "data",
            CliError::Io { .. } => "io",
            CliError::Runs { .. } => "run-failed",
        }
    }

    /// The structured report written to stderr.
    pub fn report(&self) -> serde_json::Value {
        let mut body = serde_json::json!({
            "kind": self.kind(),
            "message": self.to_string(),
        });
        if let CliError::Runs { total, failures } = self {
            body["total"] = (*total).into();
            body["failures"] = serde_json::to_value(failures).expect("serializable");
        }
        serde_json::json!({ "error": body })
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}
