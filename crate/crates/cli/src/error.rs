use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config parse error in {path}: {message}")]
    ConfigParse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{0}")]
    ProblemUnknown(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("schema mismatch in {path}: {message}")]
    SchemaMismatch { path: PathBuf, message: String },
    #[error(transparent)]
    Model(ipalloc::Error),
}

impl From<ipalloc::Error> for CliError {
    fn from(e: ipalloc::Error) -> Self {
        match e {
            ipalloc::Error::UnknownProblem { .. } => CliError::ProblemUnknown(e.to_string()),
            other => CliError::Model(other),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}
