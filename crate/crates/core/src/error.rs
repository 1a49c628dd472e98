use thiserror::Error;

use crate::runtime::Phase;

/// Errors raised by the sharing layer, the runtime and the protocols built on top.
#[derive(Debug, Error)]
pub enum Error {
    #[error("value {value} is outside the representable range (|x| < {bound})")]
    Overflow { value: f64, bound: f64 },

    #[error("invalid fixed-point configuration: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch { expected: Vec<usize>, actual: Vec<usize> },

    #[error("party mismatch: {0}")]
    PartyMismatch(String),

    #[error("correlated randomness #{0} was already consumed")]
    Reused(u64),

    #[error("provisioning shortfall: needed {needed} more {kind} (next request {request})")]
    Shortfall { kind: &'static str, needed: usize, request: String },

    #[error("provisioned material does not match request: expected {expected}, got {actual}")]
    PlanMismatch { expected: String, actual: String },

    #[error("message sent to {to} during the {phase} phase violates the phase separation")]
    PhaseViolation { to: String, phase: Phase },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("index {index} out of bounds (limit {limit}): {what}")]
    OutOfBounds { what: &'static str, index: usize, limit: usize },

    #[error("non-finite loss at candidate {0}")]
    NonFiniteLoss(usize),

    #[error("covariance matrix is not positive definite (min eigenvalue {0})")]
    NotPositiveDefinite(f64),

    #[error("malformed wire data: {0}")]
    Wire(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("report schema mismatch: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Overflow { .. } => "overflow",
            Error::InvalidConfig(_) => "invalid_config",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::PartyMismatch(_) => "party_mismatch",
            Error::Reused(_) => "reused",
            Error::Shortfall { .. } => "shortfall",
            Error::PlanMismatch { .. } => "plan_mismatch",
            Error::PhaseViolation { .. } => "phase_violation",
            Error::Empty(_) => "empty",
            Error::OutOfBounds { .. } => "out_of_bounds",
            Error::NonFiniteLoss(_) => "non_finite_loss",
            Error::NotPositiveDefinite(_) => "not_positive_definite",
            Error::Wire(_) => "wire",
            Error::Parse(_) => "parse",
            Error::Schema(_) => "schema",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
