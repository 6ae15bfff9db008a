use thiserror::Error;

/// Errors raised by corrkit operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid signature: {0}")]
    InvalidSignature(String),

    #[error("factor index {index} out of range for {factors} factors")]
    FactorOutOfRange { index: usize, factors: usize },

    #[error("signature mismatch: {left} vs {right}")]
    SignatureMismatch { left: String, right: String },

    #[error("resource limit exceeded: {what} would need {needed}, cap is {cap}")]
    ResourceLimit {
        what: &'static str,
        needed: usize,
        cap: usize,
    },

    #[error("incompatible free-subgroup witness: {0}")]
    IncompatibleWitness(String),

    #[error("invalid setting or outcome: {0}")]
    InvalidIndex(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian (deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("not a unitary representation: {0}")]
    NotUnitary(String),

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("measurement family is not projective: {0}")]
    NotProjective(String),

    #[error("operators do not commute: {0}")]
    CommutatorViolation(String),

    #[error("invalid correlation table: {0}")]
    InvalidTable(String),

    #[error("signaling input: {0}")]
    Signaling(String),

    #[error("invalid steering data: {0}")]
    InvalidSteeringData(String),

    #[error("map is not unital completely positive: {0}")]
    NotUcp(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
