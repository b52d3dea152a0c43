use thiserror::Error;

/// Error type shared across the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A trace or dataset cannot be analyzed (no half-max crossing, empty data, ...).
    #[error("analysis failed: {0}")]
    Analysis(String),

    /// The tomographic inversion could not produce a process matrix.
    #[error("reconstruction failed: {0}")]
    Reconstruction(String),

    /// A numerical routine failed to converge or hit a degenerate matrix.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A config file could not be parsed. Line numbers are 1-based.
    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
