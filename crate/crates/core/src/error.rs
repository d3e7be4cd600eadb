use thiserror::Error;

/// Broad failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad parameters or configuration.
    Config,
    /// Malformed or inconsistent input data.
    Data,
    /// The numerics could not produce an answer.
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid floor plan: {0}")]
    InvalidPlan(String),

    #[error("empty region: the floor plan has zero free area")]
    EmptyRegion,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate bandwidth: {0}")]
    DegenerateBandwidth(String),

    #[error("zero-norm signal set at index {0}")]
    ZeroNormSignal(usize),

    #[error("isolated node {0}: zero degree")]
    IsolatedNode(usize),

    #[error("multiple trivial components; embed per component or connect the graph")]
    Disconnected,

    #[error("ill-posed calibration: regularized Gram matrix is singular (min/max eigenvalue ratio {ratio:.3e}); use lambda > 0 or a smaller d")]
    IllPosed { ratio: f64 },

    #[error("eigensolver did not converge: {0}")]
    NoConvergence(String),

    #[error("insufficient density: center {center} has {found} raw signals within {radius} m, need {needed}")]
    InsufficientDensity {
        center: usize,
        found: usize,
        needed: usize,
        radius: f64,
    },

    #[error("infinite geodesic distance: {0}")]
    Unreachable(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("missing column: {0}")]
    MissingColumn(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidParameter(_) | Error::InvalidPlan(_) | Error::EmptyRegion => {
                ErrorKind::Config
            }
            Error::DegenerateBandwidth(_)
            | Error::IsolatedNode(_)
            | Error::Disconnected
            | Error::IllPosed { .. }
            | Error::NoConvergence(_)
            | Error::Unreachable(_) => ErrorKind::Numerical,
            _ => ErrorKind::Data,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
