use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Caller violated an operation's preconditions (mismatched orders, out of range sizes, ...).
    #[error("usage error: {0}")]
    Usage(String),

    /// A formal precondition on the input series failed.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical procedure could not reach its accuracy target.
    #[error("accuracy error: {0}")]
    Accuracy(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}
