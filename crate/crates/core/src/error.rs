use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("missing mandatory keyword {0}")]
    MissingKeyword(&'static str),

    #[error("unsupported problem type {0}")]
    UnsupportedType(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("graph is disconnected")]
    Disconnected,

    #[error("residual graph disconnected after {completed} of {requested} spanning-tree levels")]
    PartialExtraction { completed: usize, requested: usize },

    #[error("lp solver error: {0}")]
    Solver(String),

    #[error("instance too large for exact dynamic programming (n = {n}, cap = {cap}); use branch-and-cut")]
    TooLarge { n: usize, cap: usize },

    #[error("labeling error: {0}")]
    Labeling(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("data error at row {row}: {msg}")]
    Data { row: usize, msg: String },

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
