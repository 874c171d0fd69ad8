use thiserror::Error;

/// Errors produced by the analysis, optimization and simulation routines.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument was outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration key was missing, malformed or inconsistent with others.
    #[error("config error for key `{key}`: {message}")]
    Config { key: String, message: String },

    /// Matrix or vector sizes do not agree.
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// A phase vector entry is not of unit modulus.
    #[error("phase entry {index} has modulus {modulus}, expected 1")]
    NotUnitModulus { index: usize, modulus: f64 },

    /// A covariance matrix has an eigenvalue below the PSD floor.
    #[error("matrix is not positive semidefinite: min eigenvalue {min} vs max {max}")]
    NotPsd { min: f64, max: f64 },

    /// A numerical form is outside its stable range.
    #[error("range error: {0}")]
    Range(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
