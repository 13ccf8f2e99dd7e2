use thiserror::Error;

/// Errors raised by model loading, assembly, and the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or physically inconsistent input (model file, options).
    #[error("configuration error: {0}")]
    Config(String),

    /// An operation was called on inputs that violate its precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The integrator could not advance.
    #[error("integrator failed at t = {time} ps: {reason}")]
    Integrator { time: f64, reason: String },

    /// A linear solve or decomposition failed.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
