use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("edge list line {line}: {msg}")]
    EdgeList { line: usize, msg: String },

    #[error("matrix is not square: {rows} x {cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive semidefinite (smallest eigenvalue {0:e})")]
    NotPositiveSemidefinite(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("gossip model needs at least one realizable edge")]
    EmptyGossip,

    #[error("invalid probability {0}: must lie in [0, 1]")]
    InvalidProbability(f64),

    #[error("quantizer step must be positive and finite, got {0}")]
    InvalidStep(f64),

    #[error("quantizer input is not finite")]
    NonFiniteInput,

    #[error("quantizer input {0} is too large relative to the step to quantize exactly")]
    InputOutOfRange(f64),

    #[error("dither {nu} is outside [-{half}, {half})")]
    DitherOutOfSupport { nu: f64, half: f64 },

    #[error("invalid weight sequence: {0}")]
    InvalidWeights(String),

    #[error("divergent series: {0}")]
    DivergentSeries(String),

    #[error("initial state x0[{index}] = {value} violates |x0| <= b = {bound}")]
    InitialStateOutOfBounds {
        index: usize,
        value: f64,
        bound: f64,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("mean graph is not connected: lambda2 = {0:e}")]
    NotConnected(f64),

    #[error("step size alpha({iteration}) = {alpha} exceeds 2/(lambda2 + lambdaN) = {limit}")]
    StepSizeTooLarge {
        iteration: usize,
        alpha: f64,
        limit: f64,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
