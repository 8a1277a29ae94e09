use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the requested operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A series or iteration did not converge, or a factorization broke down.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// A quadrature or truncation error estimate exceeded its tolerance.
    #[error("accuracy error: {0}")]
    Accuracy(String),
    /// A value cannot be represented even after log-scaling.
    #[error("range error: {0}")]
    Range(String),
    /// An identity that must hold (determinant, realness, ...) was violated.
    #[error("consistency error: {0}")]
    Consistency(String),
    /// Contour geometry is unsuitable for the requested evaluation.
    #[error("geometry error: {0}")]
    Geometry(String),
    /// Adaptive integration could not proceed.
    #[error("integration failed at s = {s}: {reason}")]
    Integration { s: f64, reason: String },
    /// Invalid command-line or configuration input.
    #[error("usage error: {0}")]
    Usage(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub(crate) fn consistency(msg: impl Into<String>) -> Self {
        Error::Consistency(msg.into())
    }
}
