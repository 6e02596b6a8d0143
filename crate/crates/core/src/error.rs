use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("integrity error: {message} (keys: {keys:?})")]
    Integrity {
        message: String,
        keys: Vec<(String, i32)>,
    },

    #[error("no CPI value for year {0}")]
    MissingCpi(i32),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("design matrix is rank deficient; collinear columns: {columns:?}")]
    RankDeficient { columns: Vec<String> },

    #[error("binary response has a single class")]
    OneClass,

    #[error("cluster-robust covariance needs at least two clusters")]
    SingleCluster,

    #[error("contingency table has a zero marginal")]
    ZeroMarginal,

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
