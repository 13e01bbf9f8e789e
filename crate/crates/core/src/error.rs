use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A model parameter violates one of its invariants.
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    /// Configuration text could not be turned into parameters.
    #[error("config error: {0}")]
    Config(String),

    /// A policy decision broke an admissibility rule during simulation.
    #[error("inadmissible decision on path {path}, step {step}: {detail}")]
    Inadmissible {
        path: usize,
        step: usize,
        detail: String,
    },

    /// The policy itself failed while a path was being simulated.
    #[error("policy failed on path {path}, step {step}: {source}")]
    Policy {
        path: usize,
        step: usize,
        #[source]
        source: Box<Error>,
    },

    /// Terminal wealth was not positive, so its logarithm is undefined.
    #[error("nonpositive terminal wealth on {} path(s), first offenders: {:?}", .paths.len(), &.paths[..paths.len().min(10)])]
    NonPositiveWealth { paths: Vec<usize> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
