use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("did not converge: {0}")]
    NonConvergent(String),

    #[error("{what} = {value} lies outside [{lo}, {hi}]")]
    OutOfRange { what: &'static str, value: f64, lo: f64, hi: f64 },

    #[error("domain too small: half-width {half_width} < required {required}")]
    DomainTooSmall { half_width: f64, required: f64 },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("initial data violate the positivity hypothesis: integral of u0 + b* u1 = {0}")]
    PositivityViolation(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("need at least {needed} points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("need at least {needed} snapshots, got {got}")]
    InsufficientSnapshots { needed: usize, got: usize },

    #[error("no blow-up before the horizon {horizon}")]
    NoBlowupWithinHorizon { horizon: f64 },

    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
