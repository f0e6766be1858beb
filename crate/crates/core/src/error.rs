use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("line {line}: {message}")]
    Value { line: u64, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("vertex {0} has no label")]
    MissingLabel(u32),

    #[error("vertex {0} is already in the subset")]
    DuplicateVertex(u32),

    #[error("bin {0} has no candidate edges")]
    EmptyBin(usize),

    #[error("every bin is empty; nothing to estimate")]
    NoActiveBins,

    #[error("subset has zero predicted score; it was not drawn by the sampler")]
    ZeroSubsetScore,

    #[error("expected a label for vertex {expected:?}, got vertex {got}")]
    UnexpectedVertex { expected: Option<u32>, got: u32 },

    #[error("moment {0} is unavailable for this subset size")]
    MomentUnavailable(&'static str),

    #[error("inclusion probability is zero for an observed configuration")]
    ZeroInclusion,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
