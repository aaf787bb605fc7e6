use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("mode index {mode} out of range for a {n_modes}-mode state")]
    InvalidMode { mode: usize, n_modes: usize },

    #[error("component {index} has a degenerate covariance (condition number {condition:.3e})")]
    DegenerateComponent { index: usize, condition: f64 },

    #[error("component {index} covariance is not symmetric (relative asymmetry {asymmetry:.3e})")]
    NotSymmetric { index: usize, asymmetry: f64 },

    #[error("matrix is not symplectic: |S J S^T - J| = {residual:.3e}")]
    NotSymplectic { residual: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("reality check failed: imaginary part {imag:.3e} against real part {real:.3e}; the state is not conjugate-paired")]
    RealityViolation { imag: f64, real: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("moment order {order} exceeds the supported budget of 8")]
    OrderBudget { order: u32 },

    #[error("ring system is ill-conditioned (condition number {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("ring approximation too poor: tail norm {tail:.3e} exceeds 10%")]
    PoorApproximation { tail: f64 },

    #[error("heralding probability {probability:.3e} is too small to normalize")]
    HeraldTooUnlikely { probability: f64 },

    #[error(
        "no crossing in bracket: margin({lo}) = {margin_lo:.6e}, margin({hi}) = {margin_hi:.6e}"
    )]
    NoCrossing {
        lo: f64,
        hi: f64,
        margin_lo: f64,
        margin_hi: f64,
    },

    #[error("pair mismatch: cumulant set was built with {found} but {expected} is required")]
    PairMismatch { expected: String, found: String },

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("need at least {required} samples, got {found}")]
    InsufficientSamples { required: usize, found: usize },

    #[error("Fock truncation leakage {leakage:.3e} at cutoff {cutoff} exceeds 1e-6; increase the cutoff")]
    Leakage { leakage: f64, cutoff: usize },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, column: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            column,
            message: message.into(),
        }
    }
}
