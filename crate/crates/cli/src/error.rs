use serde_json::json;
use thiserror::Error;

use crate::config::Diagnostic;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("config is not runnable: {}", .0.iter().map(|d| format!("{}: {}", d.field, d.message)).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),

    #[error(transparent)]
    Core(#[from] subag_core::Error),

    #[error("io: {0}")]
    Io(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config { .. } | RunError::Invalid(_) => 2,
            RunError::Core(_) | RunError::Io(_) => 1,
        }
    }

    /// Machine-readable form written to stderr by the binary.
    pub fn report(&self) -> serde_json::Value {
        let body = match self {
            RunError::Config { field, message } => json!({ "kind": "config", "field": field, "message": message }),
            RunError::Invalid(diags) => json!({ "kind": "invalid", "diagnostics": diags }),
            RunError::Core(e) => json!({ "kind": "solver", "message": e.to_string() }),
            RunError::Io(m) => json!({ "kind": "io", "message": m }),
        };
        json!({ "error": body })
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e.to_string())
    }
}

impl From<csv::Error> for RunError {
    fn from(e: csv::Error) -> Self {
        RunError::Io(e.to_string())
    }
}
