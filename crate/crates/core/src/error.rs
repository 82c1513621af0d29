use thiserror::Error;

/// Errors produced by weight generation, discrete operators and integrators.
#[derive(Debug, Error)]
pub enum FviError {
    #[error("BDF order {0} is out of range (supported orders are 1..=6)")]
    InvalidBdfOrder(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("numerical degeneracy: {0}")]
    Degenerate(String),

    #[error("step {step} failed: {reason} (residual {residual:.3e} after {iterations} iterations)")]
    StepFailure {
        step: usize,
        iterations: usize,
        residual: f64,
        reason: String,
    },

    #[error("unknown model id '{0}' (known: damped-osc, torvik-14, torvik-34)")]
    UnknownModel(String),

    #[error("unknown function id '{0}' (expected forms: t^Q or t^Q*sin)")]
    UnknownFunction(String),
}

pub type Result<T> = std::result::Result<T, FviError>;
