use thiserror::Error;

/// Errors raised by estimators, tests and I/O.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Argument outside the image of a transformation, or a non-positive
    /// response for a family that requires positive data.
    #[error("value {value} outside the domain ({lower}, {upper})")]
    Domain { value: f64, lower: f64, upper: f64 },

    #[error("kernel weights vanish at the evaluation point")]
    EmptyNeighborhood,

    #[error("design matrix is numerically singular (condition number {condition:.3e})")]
    SingularDesign { condition: f64 },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("variance estimate is not positive ({0})")]
    DegenerateVariance(f64),

    #[error("Gauss-Newton did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize, last: Vec<f64> },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
