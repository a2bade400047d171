//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{name} must be strictly positive, got {value}; all physical coefficients of the system are positive constants")]
    NonPositive { name: &'static str, value: f64 },

    #[error("non-finite value in {what}: component {component} is {value}")]
    NonFinite {
        what: &'static str,
        component: String,
        value: f64,
    },

    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid argument for {what}: {message}")]
    InvalidArgument { what: &'static str, message: String },

    #[error(
        "basis of {requested} total grid points exceeds the memory budget of {budget} f64 slots"
    )]
    ResourceLimit { requested: usize, budget: usize },

    #[error("numerical blow-up at t = {time:.6e}: grid sup-norm {sup_norm:.6e}; the continuous system cannot blow up, so the time step is too large")]
    BlowUp { time: f64, sup_norm: f64 },

    #[error("tangent frame is not orthonormal: Gram defect {defect:.3e} exceeds {tol:.1e}")]
    NotOrthonormal { defect: f64, tol: f64 },

    #[error("tail window [{t_tail:.3}, {t_end:.3}] contains no samples")]
    EmptyTail { t_tail: f64, t_end: f64 },

    #[error("residual evaluation needs at least {needed} stored states, got {got}")]
    InsufficientStates { needed: usize, got: usize },

    #[error("configuration invalid:\n{}", violations.join("\n"))]
    Config { violations: Vec<String> },

    #[error("checkpoint rejected: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Attach module-level context while propagating an inner error.
    pub fn with_context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
