use staggerdid::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// A configuration problem, tagged with the offending field path.
    #[error("{field}: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn config(field: &str, message: String) -> Self {
        CliError::Config {
            field: field.to_string(),
            message,
        }
    }

    /// 1 for bad input or configuration, 2 when estimation itself fails.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Io(_) | CliError::Json(_) | CliError::Csv(_) => 1,
            CliError::Core(e) => match e {
                CoreError::Schema(_)
                | CoreError::Integrity { .. }
                | CoreError::MissingCpi(_)
                | CoreError::InvalidInput(_)
                | CoreError::Io(_)
                | CoreError::Csv(_)
                | CoreError::Json(_) => 1,
                CoreError::RankDeficient { .. }
                | CoreError::OneClass
                | CoreError::SingleCluster
                | CoreError::ZeroMarginal
                | CoreError::Estimation(_) => 2,
            },
        }
    }
}
