use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid combination: {0}")]
    InvalidCombination(String),

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("quadrature did not converge: {0}")]
    NonConvergent(String),

    #[error("h*h is unavailable for this kernel without certification: {0}")]
    RequiresCertification(String),

    #[error("sampling failed after {attempts} attempts (accepted {accepted}): {reason}")]
    SamplingFailure {
        attempts: u64,
        accepted: u64,
        reason: String,
    },

    #[error("unreliable estimate: {excluded} of {total} replicates excluded (limit {limit})")]
    UnreliableEstimate {
        excluded: u64,
        total: u64,
        limit: f64,
    },

    #[error("replicate {replicate} hit the {which} cap")]
    CapExceeded { replicate: u64, which: &'static str },

    #[error("bound violated: {0}")]
    BoundViolation(String),

    #[error("field is nonzero outside the kernel support at {0:?}")]
    ExteriorViolation([f64; 3]),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid base field: {0}")]
    InvalidBaseField(String),

    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
