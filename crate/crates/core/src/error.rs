use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("distance out of model range: {0} m")]
    DistanceOutOfRange(f64),

    #[error("trace underrun: need {needed} slots, have {available}")]
    TraceUnderrun { needed: usize, available: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("invalid action: {0}")]
    InvalidAction(String),

    #[error("episode exhausted")]
    EpisodeExhausted,

    #[error("divergence: {0}")]
    Divergence(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}
