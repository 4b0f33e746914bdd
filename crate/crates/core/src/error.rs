use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("column {0} is identically zero and cannot be rescaled")]
    ZeroColumn(usize),

    #[error("invalid penalty: {0}")]
    InvalidPenalty(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("exhaustive enumeration of {subsets:.3e} subsets exceeds the budget of {budget}; use the heuristic search")]
    BudgetExceeded { subsets: f64, budget: u64 },

    #[error("malformed data at row {row}, column {column}: {message}")]
    Csv {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("empty solution path")]
    EmptyPath,

    #[error("fit failed at lambda = {lambda}: {source}")]
    AtLambda {
        lambda: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("replication {rep}, method {method}: {source}")]
    InReplication {
        rep: usize,
        method: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    CsvLib(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NonFinite(_) | Error::Singular(_) => true,
            Error::AtLambda { source, .. } | Error::InReplication { source, .. } => {
                source.is_numerical()
            }
            _ => false,
        }
    }
}
