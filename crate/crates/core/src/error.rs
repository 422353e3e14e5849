use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),
    #[error("hyperparameter error: {0}")]
    Hyperparameter(String),
    #[error("kernel evaluation error: {0}")]
    Evaluation(String),
    #[error("assembly error: {0}")]
    Assembly(String),
    #[error("matrix is not positive definite: {0}")]
    Definiteness(String),
    #[error("solver did not converge: {0}")]
    Convergence(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("training failed: {0}")]
    Training(String),
    #[error("stale checkpoint: {0}")]
    StaleCheckpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn hyper(msg: impl Into<String>) -> Self {
        Error::Hyperparameter(msg.into())
    }
}
