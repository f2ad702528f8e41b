use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite objective or gradient: {0}")]
    NonFiniteObjective(String),

    #[error("fit did not converge: {0}")]
    NonConvergence(String),

    #[error("information matrix is not positive definite: {0}")]
    SingularInformation(String),

    #[error(
        "zero rate {target} is unreachable; achievable interval is [{floor:.6}, {ceiling:.6}]"
    )]
    UnreachableZeroRate {
        target: f64,
        floor: f64,
        ceiling: f64,
    },

    /// A grid cell whose generator could not be calibrated.
    #[error("scenario {cell}: {source}")]
    Scenario {
        cell: String,
        #[source]
        source: Box<Error>,
    },

    /// A fit stopped on a parameter-space boundary; the message says which.
    #[error("boundary fit: {0}")]
    Boundary(String),

    #[error("no result rows in {0}")]
    EmptyResults(String),

    #[error("input error at row {row}, column '{column}': {message}")]
    Input {
        row: usize,
        column: String,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
