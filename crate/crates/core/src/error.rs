use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Dimension {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("non-finite value produced by {0}")]
    NonFinite(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("ingestion error at row {row}, column {column}: {message}")]
    Ingest {
        row: usize,
        column: String,
        message: String,
    },

    #[error("dates not strictly increasing at row {row}: {date}")]
    Ordering { row: usize, date: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("index {index} out of range for {len} days")]
    OutOfRange { index: usize, len: usize },

    #[error("mode error: {0}")]
    Mode(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("undefined statistic: {0}")]
    UndefinedStatistic(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate risk: {0}")]
    DegenerateRisk(String),

    #[error("training aborted at epoch {epoch}, batch {batch}: {reason}")]
    TrainingAborted {
        epoch: usize,
        batch: usize,
        reason: String,
    },

    #[error("checkpoint version {found} not supported (expected {expected})")]
    CheckpointVersion { found: u16, expected: u16 },

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
