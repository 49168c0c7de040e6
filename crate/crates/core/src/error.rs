//! Crate-wide error type.
//!
//! Every fallible operation returns [`Result`]. Mathematical *claim violations*
//! (a certified inequality failing, two independent routes disagreeing) are not
//! errors: they are reported in result structs so callers can surface them
//! without losing diagnostics.

/// Errors produced by geometry, search, and I/O operations.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("zero (or numerically zero) direction vector")]
    ZeroDirection,

    #[error("invalid body: {0}")]
    InvalidBody(String),

    #[error("operation requires a smooth strictly convex body: {0}")]
    NotSmooth(String),

    #[error("this body representation has no closed-form serialization")]
    NotSerializable,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("point not in convex hull (best residual {residual:.3e})")]
    HullInfeasible { residual: f64 },

    #[error("root bracketing failed: {0}")]
    Bracket(String),

    #[error("linear program did not terminate (pivot budget exhausted)")]
    LpStalled,

    #[error("optimizer failed: {0}")]
    NoConvergence(String),

    #[error("io error")]
    Io(#[from] std::io::Error),

    #[error("malformed json")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
