use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A model or rate parameter violates its admissible range.
    #[error("invalid parameter {name} = {value}: requires {constraint}")]
    InvalidParameter {
        name: &'static str,
        value: String,
        constraint: &'static str,
    },
    /// An argument lies outside the domain of the function called.
    #[error("domain error: {0}")]
    Domain(String),
    /// A state does not belong to the state space implied by the parameters.
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("singular linear system: {0}")]
    Singular(String),
    #[error("no convergence: {0}")]
    NonConvergence(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, value: impl ToString, constraint: &'static str) -> Self {
        Error::InvalidParameter {
            name,
            value: value.to_string(),
            constraint,
        }
    }
}
