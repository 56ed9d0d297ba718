use core::fmt;

/// Failure modes shared by every numerical routine in the crate.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    Domain(&'static str),
    /// The tail exponent does not satisfy `gamma > 1`.
    Regime { gamma: f64 },
    /// Requested feature is not provided (e.g. a third cutoff derivative).
    Unsupported(&'static str),
    /// Adaptive quadrature stopped before reaching the requested tolerance.
    Accuracy { achieved: f64, requested: f64 },
    /// Non-finite values appeared in a time integration.
    Instability { t: f64 },
    /// A fixed-point iteration stopped contracting.
    Divergence { iterations: usize, update: f64 },
    /// The time stepper rejected too many consecutive steps.
    StepFailure { t: f64, dt: f64 },
    /// A least-squares design matrix is rank deficient.
    Degenerate(&'static str),
    /// Too few samples (or too narrow a window) for a fit.
    InsufficientData { samples: usize, decades: f64 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(what) => write!(f, "domain error: {what}"),
            Error::Regime { gamma } => write!(f, "tail exponent gamma = {gamma} must exceed 1"),
            Error::Unsupported(what) => write!(f, "unsupported: {what}"),
            Error::Accuracy { achieved, requested } => write!(
                f,
                "quadrature reached error {achieved:e}, requested {requested:e}"
            ),
            Error::Instability { t } => write!(f, "non-finite state at t = {t}"),
            Error::Divergence { iterations, update } => write!(
                f,
                "fixed-point iteration diverging after {iterations} iterations (update {update:e})"
            ),
            Error::StepFailure { t, dt } => {
                write!(f, "time step failed repeatedly at t = {t} (dt = {dt:e})")
            }
            Error::Degenerate(what) => write!(f, "degenerate least-squares problem: {what}"),
            Error::InsufficientData { samples, decades } => write!(
                f,
                "fit needs >= 30 samples over >= 1.5 decades, got {samples} over {decades:.2}"
            ),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
