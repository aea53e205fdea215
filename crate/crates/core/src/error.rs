use thiserror::Error;

/// Errors raised by the geometry, array, channel and beamforming layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate local frame: {0}")]
    DegenerateFrame(String),

    #[error("orbit arc is ambiguous: start and end points are antipodal")]
    AmbiguousArc,

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error(
        "infeasible tilt interval: departure bound {alpha_departure:.6} rad exceeds incident bound {alpha_incident:.6} rad"
    )]
    InfeasibleTilt {
        alpha_departure: f64,
        alpha_incident: f64,
    },

    #[error("zero vector passed to {0}")]
    ZeroVector(&'static str),

    #[error("singular value decomposition failed: {0}")]
    Svd(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
