use thiserror::Error;

pub type Result<T> = std::result::Result<T, CkdvError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CkdvError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("unsupported derivative order {0} (expected 1, 2 or 3)")]
    UnsupportedOrder(u32),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("length mismatch: expected {expected} samples, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("component index {index} out of range (state has {count} components)")]
    IndexOutOfRange { index: usize, count: usize },

    #[error(
        "domain too small for line-integral proxy: |f| = {edge_value:e} at the left edge exceeds {tolerance:e}"
    )]
    DecayViolation { edge_value: f64, tolerance: f64 },

    #[error("degenerate normalization: {0}")]
    DegenerateNormalization(&'static str),

    #[error("blow-up or instability detected at t = {t} (step {step})")]
    BlowUp { t: f64, step: usize },

    #[error("time step {dt} exceeds the stability ceiling {ceiling}")]
    TimeStepTooLarge { dt: f64, ceiling: f64 },

    #[error("a-priori discriminant d^2 + 4e = {0} is negative")]
    NegativeDiscriminant(f64),

    #[error("soliton with C = {speed} does not decay on this domain (boundary value {boundary_value:e})")]
    DomainFit { speed: f64, boundary_value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
