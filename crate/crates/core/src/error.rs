use std::path::PathBuf;

use thiserror::Error;

use crate::selector::SelectorError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed document {path} at line {line}, column {column}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        msg: String,
    },
    #[error("invalid site spec: {0}")]
    InvalidSite(String),
    #[error("invalid task {task}: {msg}")]
    InvalidTask { task: String, msg: String },
    #[error("url {0} does not exist in the site")]
    UnknownUrl(String),
    #[error("task {task} belongs to site {task_site}, environment hosts {env_site}")]
    ForeignTask {
        task: String,
        task_site: String,
        env_site: String,
    },
    #[error("no episode is running")]
    NoEpisode,
    #[error("episode already terminated")]
    EpisodeTerminated,
    #[error("episode has not terminated")]
    EpisodeNotTerminated,
    #[error("unknown drift version {0}")]
    UnknownVersion(u32),
    #[error("malformed action: {0}")]
    InvalidAction(String),
    #[error(transparent)]
    Selector(#[from] SelectorError),
    #[error("validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("gateway error: {0}")]
    Gateway(String),
    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn json(path: impl Into<PathBuf>, err: &serde_json::Error) -> Self {
        Error::Parse {
            path: path.into(),
            line: err.line(),
            column: err.column(),
            msg: err.to_string(),
        }
    }
}
