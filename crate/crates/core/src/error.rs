use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate squeeze phase: tan(theta_minus / 2) = {0:e}")]
    DegenerateSqueezePhase(f64),

    #[error("singular phase configuration: {0}")]
    SingularPhase(String),

    #[error("not symplectic: {0}")]
    NotSymplectic(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid phases for {scheme}: {reason}")]
    InvalidPhases { scheme: String, reason: String },

    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),

    #[error("gate {index} is not symplectic: {reason}")]
    NonSymplecticGate { index: usize, reason: String },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("area ratio undefined: no cells where the four-node norm is smaller")]
    ZeroDenominator,
}

pub type Result<T> = std::result::Result<T, Error>;
