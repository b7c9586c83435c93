use thiserror::Error;

/// Errors raised by the estimation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cell (period {period}, level `{level}`) is empty")]
    EmptyCell { period: u8, level: String },

    #[error("empty sample")]
    EmptySample,

    #[error("non-finite outcome value {0}")]
    InvalidValue(f64),

    #[error("probability {0} is outside the admissible range")]
    InvalidProbability(f64),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("unknown cell (period {period}, level `{level}`)")]
    UnknownCell { period: usize, level: String },

    #[error("unknown treatment level `{0}`")]
    UnknownLevel(String),

    #[error("invalid treatment levels: {0}")]
    InvalidLevels(String),

    #[error("counterfactual of the control level `{0}` on itself is the observed period-1 control cell")]
    SelfCounterfactual(String),

    #[error("{parameter} is not identified in {mode} mode: {reason}")]
    NotIdentified {
        parameter: String,
        mode: String,
        reason: String,
    },

    #[error("{0} requires ordered treatment levels")]
    OrderingRequired(String),

    #[error("level `{0}` is the first in the ordering and has no lower level")]
    NoLowerLevel(String),

    #[error("invalid request: {0}")]
    InvalidRequest(String),

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
