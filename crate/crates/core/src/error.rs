use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: `{field}` {reason}")]
    Config { field: String, reason: String },

    #[error("{path}:{line}: parse error: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("{path}: schema version {found} is not supported (expected {expected})")]
    SchemaVersion {
        path: PathBuf,
        found: u32,
        expected: u32,
    },

    #[error("invariant violated on `{field}`: {reason}")]
    Invariant { field: String, reason: String },

    #[error("referential integrity: {0}")]
    Referential(String),

    #[error("feature encoding: {0}")]
    Encoding(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: String,
        expected: String,
        got: String,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("max-pool readout over an empty graph")]
    EmptyGraph,

    #[error("backward called without a pending forward pass")]
    State,

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("stratification: {0}")]
    Stratification(String),

    #[error("model contract: {0}")]
    Contract(String),

    #[error("exact Shapley enumeration over {0} features exceeds the limit of 20; use the sampled estimator")]
    ShapleySize(usize),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("window leakage: graph `{patient_id}` contains an event at t = {t} beyond the observation window")]
    Leakage { patient_id: String, t: f64 },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn invariant(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invariant {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn dimension(
        context: impl Into<String>,
        expected: impl ToString,
        got: impl ToString,
    ) -> Self {
        Error::Dimension {
            context: context.into(),
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps the error with a human-readable location such as a fold or model name.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, looking through `Context` wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}
