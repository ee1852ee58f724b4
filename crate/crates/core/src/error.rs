use thiserror::Error;

/// Errors raised by the estimation and fusion routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// Innovation (or other) covariance too ill-conditioned to invert.
    #[error("degenerate covariance in {context} (condition estimate {condition:e})")]
    Degenerate {
        context: &'static str,
        condition: f64,
    },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Majority voting needs at least three detectors to reach consensus.
    #[error("at least 3 detectors are required for consensus, got {0}")]
    InsufficientDetectors(usize),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
