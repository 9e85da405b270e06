use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// An argument violates a precondition (ordering, positivity, ...).
    #[error("invalid argument: {0}")]
    Argument(String),
    /// A configuration is structurally inconsistent (grid vs. kernel validity, ...).
    #[error("configuration error: {0}")]
    Config(String),
    /// An iterative scheme failed to reach its target.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// Reading external data failed.
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
