use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("lag {lag} not admissible: {reason}")]
    InadmissibleLag { lag: usize, reason: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Spectral inversion under periodic sampling: the replicated spectra overlap.
    #[error("periodic sampling aliases the spectrum: copies of the traffic spectrum overlap irreversibly, PSD inversion refused")]
    Aliasing,

    #[error("trace format: {0}")]
    Format(String),

    #[error("driver failure at slot {slot}: {reason}")]
    Driver { slot: u64, reason: String },

    #[error("internal numerical error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
