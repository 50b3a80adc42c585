use thiserror::Error;

/// Errors raised by the solvers and the map registry.
///
/// `Stalled` and `SingularJacobian` double as solver outcomes: the drivers
/// catch them and report them through [`SolveStatus`](crate::SolveStatus)
/// instead of returning them.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("unknown map `{0}`")]
    UnknownMap(String),

    #[error("invalid parameters for map `{map}`: {reason}")]
    InvalidParams { map: String, reason: String },

    #[error("matrix is numerically singular: pivot {pivot:e} in column {column}")]
    SingularMatrix { column: usize, pivot: f64 },

    #[error("jacobian is singular at sample {index}, x = {point:?}")]
    SingularJacobian { index: usize, point: Vec<f64> },

    #[error("line search stalled: no step t >= {t_min:e} gives sufficient decrease from merit {merit:e}")]
    Stalled { merit: f64, t_min: f64 },

    #[error("empty sample")]
    EmptySample,

    #[error("anchor does not map onto its target: residual {residual:e}")]
    AnchorMismatch { residual: f64 },

    #[error("points are not a preimage collision: |f(a) - f(b)| = {residual:e}")]
    NotACollision { residual: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("csv: {0}")]
    Csv(String),

    #[error("json: {0}")]
    Json(String),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
