use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("slot {slot} is not the open slot (open slot is {open})")]
    SlotNotOpen { slot: usize, open: usize },

    #[error("all {0} slots of the day are already closed")]
    ClockExhausted(usize),

    #[error("no slot follows slot {completed} of {num_slots}")]
    NoNextSlot { completed: usize, num_slots: usize },

    #[error("invalid auction outcome: {0}")]
    InvalidOutcome(&'static str),

    #[error("cannot size demand: {0}")]
    CannotSizeDemand(&'static str),

    #[error("quality histogram is empty")]
    EmptyHistogram,

    #[error("no cost history")]
    NoCostHistory,

    #[error("invalid value: {0}")]
    Invalid(String),

    #[error("series length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("configs do not share the same world: {0}")]
    IncompatibleWorlds(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
