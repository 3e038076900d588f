use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    /// Malformed or out-of-domain input.
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("{0} is not a unit modulo {1}")]
    NonUnit(i64, u64),
    #[error("Galois group is not cyclic: invariant factors {0:?}")]
    NotCyclic(Vec<u64>),
    /// A configured size guard was exceeded.
    #[error("guard exceeded: {0}")]
    Guard(String),
    /// A self-check on a derived fact failed.
    #[error("internal consistency check failed: {0}")]
    Internal(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Guard(_) | Error::Internal(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
