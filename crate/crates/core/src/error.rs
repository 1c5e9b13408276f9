use thiserror::Error;

/// Errors raised anywhere in the laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("wire {wire} out of range for a {n_qubits}-qubit register")]
    WireOutOfRange { wire: usize, n_qubits: usize },

    #[error("wire {0} used more than once in a single operation")]
    DuplicateWire(usize),

    #[error("{kind} expects {expected} parameter(s), got {got}")]
    ParamArity {
        kind: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{kind} requires exactly {expected} control wire(s), got {got}")]
    ControlArity {
        kind: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("register of {requested} qubits exceeds the limit of {limit}")]
    TooManyQubits { requested: usize, limit: usize },

    #[error("amplitude vector length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("state norm {0:e} is too far from 1 to renormalize")]
    BadNorm(f64),

    #[error("measurement branch has zero probability")]
    ZeroProbabilityBranch,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("operators do not commute: {0}")]
    NonCommuting(String),

    #[error("mean resultant length {0:e} is too small; direction undefined")]
    UndefinedDirection(f64),

    #[error("numerical procedure failed to converge: {0}")]
    NoConvergence(String),

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
