use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Bad user input or violated preconditions.
    #[error("invalid argument: {0}")]
    Invalid(String),
    /// A model produced a value outside what the path mathematics accepts.
    #[error("invalid model: {0}")]
    Model(String),
    /// A numerical routine could not produce a trustworthy value.
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error at {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// True for errors caused by the caller rather than by the computation.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Invalid(_))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Invalid(_) => "invalid_argument",
            Error::Model(_) => "invalid_model",
            Error::Numerical(_) => "numerical",
            Error::Io { .. } => "io",
            Error::Csv { .. } => "csv",
            Error::Json(_) => "json",
        }
    }
}

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Invalid(msg()))
    }
}
