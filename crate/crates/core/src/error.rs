use alloc::string::String;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("index {index} out of range for dimension {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("enumeration guard exceeded: n = {n} > {limit}")]
    EnumerationGuard { n: usize, limit: usize },

    #[error("query not supported here: {0}")]
    UnsupportedQuery(String),

    #[error("oracle {kind} requires a boolean query, got {digest}")]
    NonBooleanQuery { kind: &'static str, digest: String },

    #[error("sample budget of {budget} exhausted")]
    BudgetExhausted { budget: u64 },

    #[error("reference mass vanishes at the evaluated point")]
    VanishingReference,

    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn precondition(msg: impl Into<String>) -> Error {
    Error::Precondition(msg.into())
}
