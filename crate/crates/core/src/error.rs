//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CoreError>;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("region out of bounds: {what} at ({row}, {col}) outside {height}x{width}")]
    OutOfBounds {
        what: &'static str,
        row: i64,
        col: i64,
        height: usize,
        width: usize,
    },

    #[error("shape mismatch in {what}: {ah}x{aw} vs {bh}x{bw}")]
    ShapeMismatch {
        what: &'static str,
        ah: usize,
        aw: usize,
        bh: usize,
        bw: usize,
    },

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("invalid layout: {0}")]
    Layout(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value in {what} at ({row}, {col})")]
    NonFinite {
        what: &'static str,
        row: usize,
        col: usize,
    },

    #[error("transport failure with peer {peer}: {detail}")]
    Transport { peer: usize, detail: String },

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("timeout waiting for workers: {missing:?}")]
    Timeout { missing: Vec<usize> },

    #[error("worker {worker} aborted during {phase}: {detail}")]
    WorkerAbort {
        worker: usize,
        phase: &'static str,
        detail: String,
    },

    #[error("bad file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CoreError {
    pub fn param(msg: impl Into<String>) -> Self {
        CoreError::Param(msg.into())
    }

    pub fn layout(msg: impl Into<String>) -> Self {
        CoreError::Layout(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CoreError::Config(msg.into())
    }
}
