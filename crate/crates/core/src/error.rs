use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure category, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Scorer,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate embedding: zero norm")]
    DegenerateEmbedding,
    #[error("embedding contains a non-finite value at index {0}")]
    NonFinite(usize),
    #[error("empty embedding")]
    EmptyEmbedding,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("duplicate id {0}")]
    DuplicateId(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("uncalibrated score {score} for entry {entry_id}")]
    UncalibratedScore { entry_id: String, score: f64 },
    #[error("unscored pair (query {query:?}, entry {entry_id})")]
    UnscoredPair { query: String, entry_id: String },
    #[error("unknown entry {0}")]
    UnknownEntry(String),
    #[error("scorer {scorer} is not calibrated to [0, 1]")]
    NotCalibrated { scorer: String },
    #[error("scoring entry {entry_id} failed: {source}")]
    Batch {
        entry_id: String,
        #[source]
        source: Box<Error>,
    },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidArgument(_) => ErrorKind::Usage,
            Error::UnscoredPair { .. }
            | Error::UncalibratedScore { .. }
            | Error::NotCalibrated { .. }
            | Error::Transport(_)
            | Error::Protocol(_) => ErrorKind::Scorer,
            Error::Batch { source, .. } | Error::Context { source, .. } => source.kind(),
            _ => ErrorKind::Data,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
