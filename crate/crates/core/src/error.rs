use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate triangle {index} (signed area {area:e})")]
    DegenerateTriangle { index: usize, area: f64 },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("Newton iteration diverged after {iterations} iterations (residual {residual:e}): {reason}")]
    NewtonDiverged {
        iterations: usize,
        residual: f64,
        reason: String,
    },

    #[error("eigen iteration stalled after {iterations} iterations (residual {residual:e})")]
    IterationStalled { iterations: usize, residual: f64 },

    #[error("point ({x}, {y}) is not in the image of the map")]
    NotInImage { x: f64, y: f64 },

    #[error("map is not univalent on the closed unit disk: {0}")]
    NonUnivalent(String),

    #[error("boundary nodes do not match: {0}")]
    MismatchedBoundary(String),

    #[error("unsupported topology: {0}")]
    UnsupportedTopology(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
