//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("config error: {0}")]
    Config(String),

    #[error("bundle manifest not found at {}", .0.display())]
    MissingManifest(PathBuf),

    #[error("invalid bundle: {0}")]
    InvalidBundle(String),

    #[error("unknown format tag {0:?}")]
    UnknownFormat(String),

    #[error("unknown target id {0:?}")]
    UnknownTarget(String),

    #[error("unknown bug id {bug:?} for target {target:?}")]
    UnknownBug { bug: String, target: String },

    #[error("all four bundle documents are empty")]
    EmptyBundle,

    #[error("api key environment variable {0} is not set")]
    Auth(String),

    #[error("transport error: {0}")]
    Transport(String),

    #[error("backend error: {0}")]
    Backend(String),

    #[error("needed {requested} distinct candidates but obtained {} within the retry budget", .obtained.len())]
    DistinctnessExhausted {
        requested: usize,
        obtained: Vec<crate::refinery::CandidatePrompt>,
    },

    #[error("no seed artifacts were admitted to the corpus")]
    EmptyCorpus,

    #[error("seed of {size} bytes exceeds max_input_bytes {max}")]
    SeedTooLarge { size: usize, max: usize },

    #[error("empty sample passed to rank test")]
    EmptySample,

    #[error("strategy {0:?} missing from report")]
    MissingStrategy(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml error: {0}")]
    Toml(String),
}
