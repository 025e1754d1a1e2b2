use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("time grids differ: {0}")]
    GridMismatch(String),

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("solution blew up at step {step} (t = {time}, |u| = {h_norm}, ||u|| = {v_norm})")]
    BlowUp {
        step: usize,
        time: f64,
        h_norm: f64,
        v_norm: f64,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed trajectory CSV at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }
}
