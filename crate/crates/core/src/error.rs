use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("weights sum to {0}, expected 1 within 1e-9")]
    WeightSum(f64),
    #[error("weight {value} at atom {index} is negative or not finite")]
    NegativeWeight { index: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("measure has empty support")]
    EmptySupport,
    #[error("matrix is not symmetric positive semi-definite (min eigenvalue {0})")]
    NotPsd(f64),
    #[error("label sets differ: {0}")]
    LabelMismatch(String),
    #[error("coupling row {0} carries no mass")]
    ZeroRow(usize),
    #[error("label {0:?} is not observed and lies outside the observed label hull")]
    UnknownLabel(Vec<f64>),
    #[error("value {0} outside the admissible range")]
    OutOfRange(f64),
    #[error("instance needs {tuples} tuples, above the cap of {cap}")]
    InstanceTooLarge { tuples: u128, cap: usize },
    #[error("affine map is not invertible (|det| = {0})")]
    NotInvertible(f64),
    #[error("covariance is singular")]
    SingularCovariance,
    #[error("no convergence after {0} iterations")]
    MaxIterExceeded(usize),
    #[error("unknown artifact '{0}'")]
    UnknownArtifact(String),
    #[error("linear program is infeasible: {0}")]
    Infeasible(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("data error: {0}")]
    Data(String),
}

pub type Result<T> = std::result::Result<T, Error>;
