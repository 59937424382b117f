use thiserror::Error;

/// Errors surfaced by every fallible operation in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Malformed instance-file input. `line` is 1-based.
    #[error("{msg} at line {line}")]
    Parse { line: usize, msg: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The instance (or a sub-instance reached by the recursion) has no
    /// configuration of positive weight.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// A size, call or time budget was exhausted.
    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
