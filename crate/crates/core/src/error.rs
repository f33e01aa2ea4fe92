use thiserror::Error;

/// Errors produced by every module in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error at ({row}, {col}): {reason}")]
    Domain {
        row: usize,
        col: usize,
        reason: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("weight program infeasible at {} entries (raise gamma); first offenders: {:?}",
            indices.len(), &indices[..indices.len().min(8)])]
    Infeasible { indices: Vec<(usize, usize)> },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
