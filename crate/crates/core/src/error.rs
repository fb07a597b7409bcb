//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("topology: {0}")]
    Topology(String),

    #[error("unknown tunnel `{0}`")]
    UnknownTunnel(String),

    #[error("tunnel `{tunnel}` has no path index {path}")]
    UnknownPath { tunnel: String, path: usize },

    #[error("invalid split action: {0}")]
    InvalidAction(String),

    #[error("traffic config: {0}")]
    Traffic(String),

    #[error("solver: {0}")]
    Solver(String),

    #[error("network shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("config: {0}")]
    Config(String),

    #[error("training aborted: {0}")]
    Training(String),

    #[error("evaluation: {0}")]
    Eval(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
