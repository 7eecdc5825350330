//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration caught before any work starts.
    #[error("configuration error: {0}")]
    Config(String),

    /// A coordinate or index fell outside the domain it must lie in.
    #[error("domain error: {0}")]
    Domain(String),

    /// Mismatched shapes, channel counts, or buffer lengths.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Training diverged or was aborted.
    #[error("training aborted on rank {rank} at step {step}: {reason}")]
    TrainAborted {
        rank: usize,
        step: u64,
        reason: String,
    },

    /// Malformed file contents (bad magic, version, or lengths).
    #[error("format error in {path}: {reason}")]
    Format { path: String, reason: String },

    /// Workflow graph construction failed (cycles, dangling inputs, bad params).
    #[error("workflow graph error: {0}")]
    Graph(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub fn graph(msg: impl Into<String>) -> Self {
        Error::Graph(msg.into())
    }

    pub fn format(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
