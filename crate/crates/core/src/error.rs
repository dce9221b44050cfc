use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter `{name}` = {value} is outside its bounds [{lower}, {upper}]")]
    BoundsViolation {
        name: String,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("invalid parameter space: {0}")]
    InvalidSpace(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("not found: {0}")]
    NotFound(String),

    #[error("duplicate iteration record (task `{task}`, run {run_id}, iteration {iteration})")]
    DuplicateRecord {
        task: String,
        run_id: u64,
        iteration: u32,
    },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("evaluation failed: {0}")]
    Evaluation(String),

    #[error("run {run_id} of task `{task}` aborted after {completed} iterations: {reason}")]
    RunAborted {
        task: String,
        run_id: u64,
        completed: usize,
        reason: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
