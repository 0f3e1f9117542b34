use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A dataset row does not conform to its schema.
    #[error("row {row}, field {field}: {reason}")]
    Validation {
        row: usize,
        field: String,
        reason: String,
    },
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("treatment {value} at occasion {occasion} is outside the treatment support")]
    OutOfSupport { occasion: usize, value: f64 },
    #[error("design matrix is rank deficient (condition number {condition:e})")]
    RankDeficient { condition: f64 },
    #[error("complete or quasi-complete separation detected after {iterations} iterations")]
    Separation { iterations: usize },
    #[error("no convergence after {iterations} iterations")]
    NonConvergence { iterations: usize },
    #[error("positivity violation: {0}")]
    Positivity(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("zero-variance column: {0}")]
    ZeroVariance(String),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("likelihood unbounded: {0}")]
    Unbounded(String),
    #[error("unsupported for exact enumeration: {0}")]
    NotEnumerable(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("csv error: {0}")]
    Csv(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}
