use thiserror::Error;

/// Errors produced by dataset handling, partitioning, training and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("feature dimension mismatch at line {line}: expected {expected}, got {got}")]
    FeatureDim {
        line: usize,
        expected: usize,
        got: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("insufficient exemplars: {available} eligible, {requested} requested")]
    InsufficientExemplars {
        available: usize,
        requested: usize,
    },

    #[error("degenerate partition: duplicate delta {value} produces a zero-width group")]
    DegeneratePartition { value: f64 },

    #[error("numeric error: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for CLI reporting: 2 config, 3 data, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Data(_)
            | Error::Parse { .. }
            | Error::FeatureDim { .. }
            | Error::Dimension { .. }
            | Error::InsufficientExemplars { .. } => 3,
            Error::DegeneratePartition { .. } | Error::Numeric(_) => 4,
        }
    }
}
