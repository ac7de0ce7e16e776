use std::path::PathBuf;

use nmd_core::NmdError;
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Validation(String),

    #[error("{operation} failed ({context}): {source}")]
    Compute {
        operation: &'static str,
        context: String,
        #[source]
        source: NmdError,
    },

    #[error("i/o error on {path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{failed} of {total} sweep runs failed")]
    SweepFailed { failed: usize, total: usize },
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// Process exit code: 2 for bad input, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            _ => 1,
        }
    }

    /// Machine-readable form printed on stderr.
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            CliError::Validation(msg) => json!({ "error": "validation", "message": msg }),
            CliError::Compute { operation, context, source } => json!({
                "error": "computation",
                "operation": operation,
                "context": context,
                "message": source.to_string(),
            }),
            CliError::Io { path, source } => json!({ "error": "io", "path": path, "message": source.to_string() }),
            CliError::SweepFailed { failed, total } => json!({ "error": "sweep", "failed": failed, "total": total }),
        }
    }
}

/// Attaches the operation name and its parameters to a core error.
pub(crate) trait Context<T> {
    fn op(self, operation: &'static str, context: impl FnOnce() -> String) -> Result<T, CliError>;
}

impl<T> Context<T> for Result<T, NmdError> {
    fn op(self, operation: &'static str, context: impl FnOnce() -> String) -> Result<T, CliError> {
        self.map_err(|source| CliError::Compute { operation, context: context(), source })
    }
}
