use thiserror::Error;

/// Errors raised across the crate.
///
/// Variants are coarse on purpose: callers (the CLI in particular) only need
/// to tell configuration problems from data problems.
#[derive(Debug, Error)]
pub enum Error {
    #[error("rejected input: {0}")]
    InvalidInput(String),
    #[error("inconsistent state: {0}")]
    State(String),
    #[error("invalid test statistic: {0}")]
    InvalidStatistic(String),
    #[error("invalid e-value: {0}")]
    InvalidEValue(f64),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unknown test tag `{0}`")]
    UnknownTest(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for this error: 2 for configuration problems,
    /// 3 for everything data-related.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::UnknownTest(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
