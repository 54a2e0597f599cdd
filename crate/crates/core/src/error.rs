use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("network build error: {0}")]
    Build(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("evaluation failed: {0}")]
    Evaluation(String),

    /// A history sink failed. The best record seen so far is carried along so
    /// callers can still report it.
    #[error("persistence error: {message}")]
    Persistence {
        message: String,
        best_candidate: Option<String>,
        best_objective: Option<f64>,
    },

    #[error("checkpoint refused: {0}")]
    ResumeRefused(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("dataset error: {0}")]
    Dataset(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable single-word category used in CLI error lines.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Config(_) => "config",
            Error::Parse { .. } => "parse",
            Error::Build(_) => "build",
            Error::Shape(_) => "shape",
            Error::Evaluation(_) => "evaluation",
            Error::Persistence { .. } => "persistence",
            Error::ResumeRefused(_) => "resume",
            Error::Io { .. } => "io",
            Error::Dataset(_) => "dataset",
        }
    }

    /// Process exit code for the CLI: 2 config, 3 runtime, 4 resume refusal.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse { .. } => 2,
            Error::ResumeRefused(_) => 4,
            _ => 3,
        }
    }
}
