use thiserror::Error;

/// Failure classes shared by every module. The CLI maps these onto exit codes.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// The caller violated a precondition (bad arguments, wrong shapes).
    #[error("usage error: {0}")]
    Usage(String),
    /// The input data itself is unusable (non-finite values, zero-norm vectors).
    #[error("data error: {0}")]
    Data(String),
    /// A configuration cannot be realized (infeasible environment, bad parameters).
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}

pub(crate) fn data(msg: impl Into<String>) -> Error {
    Error::Data(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
