use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not positive definite (jitter cap {cap:e} exceeded)")]
    NotPositiveDefinite { cap: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("candidate set is empty")]
    EmptyCandidates,
    #[error("all candidates have already been selected")]
    Exhausted,
    #[error("residual variance {max_variance:e} fell below tolerance after {selected} selections")]
    DegenerateVariance { selected: usize, max_variance: f64 },
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("dataset is empty")]
    EmptyData,
    #[error("a model is required for this operation")]
    MissingModel,
    #[error("likelihood does not support this operation")]
    LikelihoodMismatch,
    #[error("max-value sample set is empty")]
    EmptyMaxSamples,
    #[error("point lies outside the problem bounds")]
    OutOfBounds,
    #[error("unknown problem '{name}' (valid: {valid})")]
    UnknownProblem { name: String, valid: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
