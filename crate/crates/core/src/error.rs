use std::path::PathBuf;

use thiserror::Error;

use crate::markov::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A mixture or factor set failed construction checks.
    #[error("invalid mixture: {0}")]
    InvalidMixture(String),

    #[error("model validation failed: {}", join_violations(.0))]
    Validation(Vec<Violation>),

    /// Every state assigns zero density to the observation at `step` (1-based).
    #[error("numerical underflow: observation at step {step} is impossible under the model")]
    Underflow { step: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("calibration failed: every restart failed ({0})")]
    CalibrationFailed(String),

    #[error("unknown scenario node {0}")]
    UnknownNode(usize),

    #[error("missing cost for scenario node {0}")]
    MissingCost(usize),

    #[error("CSV error at row {row}: {message}")]
    Csv { row: usize, message: String },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
