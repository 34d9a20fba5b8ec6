//! Error type shared across the crate.

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by problem construction, steppers and experiment drivers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A field or integral evaluation produced NaN or infinity.
    #[error("non-finite value from {0}")]
    NumericalFault(String),

    /// An operation that needs `I(x) = ½xᵀMx + bᵀx + c` was given a general integral.
    #[error("operation requires an integral with a quadratic form")]
    UnsupportedIntegral,

    /// The gradient vanished where a method needs it nonzero.
    #[error("gradient vanishes; skew matrix is undefined")]
    DegenerateGradient,

    /// The skew denominator fell to or below its safety floor. The step size
    /// must shrink; the step is never silently regularized.
    #[error("step rejected: skew denominator {denom:e} at or below floor {floor:e}")]
    StepRejected { denom: f64, floor: f64 },

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("linear system is numerically singular")]
    SingularStep,

    /// The fine-step reference failed its Richardson self-check.
    #[error("reference solution unresolved after {refinements} refinements (last change {last_change:e})")]
    ReferenceUnresolved {
        refinements: usize,
        last_change: f64,
    },

    /// A trajectory step failed; carries the zero-based index of the failing step.
    #[error("step {index} failed: {source}")]
    AtStep {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
