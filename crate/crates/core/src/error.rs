use thiserror::Error;

/// Errors produced by the integrators, dense-output evaluators and harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Bad arguments: dimension mismatch, invalid selector, out-of-range parameter.
    #[error("usage error: {0}")]
    Usage(String),

    /// A state or denominator that must be strictly positive is not.
    #[error("domain error: {0}")]
    Domain(String),

    /// The production-destruction model violates its own contract.
    #[error("model error: {0}")]
    Model(String),

    #[error("solver error: {0}")]
    Solver(String),

    #[error("integration failed at step {step}: {reason}")]
    Integration { step: usize, reason: String },

    #[error("oracle error: {0}")]
    Oracle(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn model(msg: impl Into<String>) -> Self {
        Error::Model(msg.into())
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
