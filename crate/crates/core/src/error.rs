use thiserror::Error;

/// Errors raised anywhere in the rate calculus or the dynamics harness.
///
/// The variants split along how a caller should react: `InvalidInput` and
/// `Domain` are caller mistakes, `Resource` means the request is well formed
/// but exceeds a configured limit, `Evaluation` is a counterfunction that
/// cannot be evaluated at the requested argument.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("resource limit exceeded: {0}")]
    Resource(String),
    #[error("cannot evaluate counterfunction at {argument}: {reason}")]
    Evaluation { argument: String, reason: String },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn resource(msg: impl Into<String>) -> Self {
        Error::Resource(msg.into())
    }

    pub fn is_resource(&self) -> bool {
        matches!(self, Error::Resource(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
