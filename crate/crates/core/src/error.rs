//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by simulator operations.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated an operation's precondition (dimension mismatch,
    /// empty codebook, negative standard deviation, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A received or stored payload could not be decoded (corrupted index
    /// field, truncated bitstream, bad magic/version).
    #[error("decode error: {0}")]
    Decode(String),

    /// A configuration file failed validation.
    #[error("config error: {0}")]
    Config(String),

    /// Deterministic construction failed after bounded retries
    /// (rank-deficient parity-check matrix, ill-conditioned mixing matrix).
    #[error("construction error: {0}")]
    Construction(String),

    /// A training loop exceeded the divergence guard.
    #[error("training diverged at step {step}: loss {loss}")]
    Diverged { step: usize, loss: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn decode(msg: impl Into<String>) -> Self {
        Error::Decode(msg.into())
    }
}
