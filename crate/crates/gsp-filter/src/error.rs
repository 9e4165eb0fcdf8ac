use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GspError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("grid mismatch between operands")]
    GridMismatch,
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),
    #[error("shift {value} is not a multiple of the grid step {step}")]
    NotGridAligned { value: f64, step: f64 },
    #[error("negative weight {value} at node {index}")]
    NegativeWeight { index: usize, value: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("matrix is not Hermitian (asymmetry {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eig:.3e}, tolerance {tol:.3e})")]
    NotPsd { min_eig: f64, tol: f64 },
    #[error("operators do not commute (commutator norm {0:.3e})")]
    NotCommuting(f64),
    #[error("spectral floor violated: min eigenvalue {min_eig:.3e} < {floor:.3e}; use the pseudo-inverse route")]
    SpectralFloor { min_eig: f64, floor: f64 },
    #[error("range condition fails: rank[Kv | Ku] = {augmented} > rank Kv = {base}")]
    RangeCondition { base: usize, augmented: usize },
    #[error("singular system in elimination at pivot {0}")]
    Singular(usize),
    #[error("inconsistent results: {0}")]
    Consistency(String),
    #[error("unknown measure constructor: {0}")]
    UnknownConstructor(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for GspError {
    fn from(e: std::io::Error) -> Self {
        GspError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, GspError>;
