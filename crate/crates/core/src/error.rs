use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("value {0} is outside the graph domain")]
    Domain(f64),

    #[error("anchor ({r0}, {y0}) is not a point of the graph")]
    InvalidAnchor { r0: f64, y0: f64 },

    #[error("resolvent solve did not converge (r = {r}, eps = {eps}, residual = {residual:e})")]
    Resolvent { r: f64, eps: f64, residual: f64 },

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("nonlinear solve did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("time step {step} failed: {source}; {remedy}")]
    Step {
        step: usize,
        remedy: String,
        #[source]
        source: Box<Error>,
    },

    #[error("missing constant: {0}")]
    MissingConstant(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
