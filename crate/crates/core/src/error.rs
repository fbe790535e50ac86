use thiserror::Error;

/// Errors produced by grid construction, field I/O and the solvers.
#[derive(Debug, Error)]
pub enum FpmeError {
    #[error("unsupported dimension {0} (only 1 and 2 are supported)")]
    UnsupportedDimension(usize),

    #[error("grid resolution must be at least 2, got {0}")]
    ResolutionTooSmall(usize),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("field length {got} does not match grid cell count {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("total mass must be positive, got {0}")]
    NonPositiveMass(f64),

    #[error("mass mismatch: {0}")]
    MassMismatch(String),

    #[error("sigma must lie in (0, 1), got {0}")]
    InvalidSigma(f64),

    #[error("exponent m must lie in (0, 2], got {0}")]
    InvalidExponent(f64),

    #[error("kernel is singular at a zero lattice difference")]
    KernelSingularity,

    #[error("invalid kernel configuration: {0}")]
    InvalidKernelConfig(String),

    #[error("negative argument to the m-mean: ({0}, {1})")]
    NegativeArgument(f64, f64),

    #[error("derivative of the m-mean is unbounded at vacuum (s={s}, t={t}, m={m})")]
    VacuumDerivative { s: f64, t: f64, m: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("problem too large: {0}")]
    TooLarge(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("instability detected: {0}")]
    Instability(String),

    #[error("format error at byte offset {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, FpmeError>;
