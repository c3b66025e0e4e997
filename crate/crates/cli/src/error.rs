use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

/// One schema problem, located by its dotted key path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config file {0} does not exist")]
    MissingFile(PathBuf),

    #[error("config violates the schema:\n{}", .0.iter().map(|v| format!("  {v}")).collect::<Vec<_>>().join("\n"))]
    SchemaViolation(Vec<Violation>),

    #[error("config is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed field file {path}: {message}")]
    FieldFormat { path: PathBuf, message: String },

    #[error(transparent)]
    Solver(#[from] waves_core::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Key paths named by a schema violation; empty for other errors.
    pub fn violation_paths(&self) -> Vec<&str> {
        match self {
            CliError::SchemaViolation(v) => v.iter().map(|v| v.path.as_str()).collect(),
            _ => Vec::new(),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
