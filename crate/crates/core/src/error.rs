use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An argument fell outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The detector position left the closed cavity interval `[0, L]`.
    #[error("detector left the cavity: x = {x} outside [0, {length}] at tau = {tau}")]
    OutOfCavity { x: f64, length: f64, tau: f64 },

    /// An integral or an evolution could not reach the requested accuracy
    /// within its evaluation budget. `best` carries the best estimate.
    #[error("accuracy target {target:e} not met: best estimate {best} with error {error:e} after {evaluations} evaluations")]
    Accuracy {
        best: Complex64,
        error: f64,
        target: f64,
        evaluations: usize,
    },

    /// Cutoff ladders that fail to settle.
    #[error("convergence failure: {0}")]
    Convergence(String),

    /// Inputs that were computed for different setups were combined.
    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("planning failed: {0}")]
    Planning(String),
}

pub type Result<T> = std::result::Result<T, Error>;
