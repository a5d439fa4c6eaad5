use std::path::PathBuf;

use maintbench_core::cluster::ClusterError;
use maintbench_core::curation::CurationParamsError;
use maintbench_core::labels::LabelError;
use maintbench_core::metrics::MetricsError;
use maintbench_core::prompt::TemplateError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}:{line}:{column}: {message}")]
    Parse { path: PathBuf, line: usize, column: usize, message: String },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error("prompt template: {0}")]
    Template(#[from] TemplateError),
    #[error("curation parameters: {0}")]
    Curation(#[from] CurationParamsError),
    #[error("{0}")]
    Metrics(#[from] MetricsError),
    #[error("dataset {path}: {message}")]
    Dataset { path: PathBuf, message: String },
    #[error("model {model:?} needs the API key in environment variable {var}, which is not set")]
    MissingAuth { model: String, var: String },
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("embedding: {0}")]
    Embedding(String),
    #[error("clustering: {0}")]
    Cluster(#[from] ClusterError),
    #[error("{0}")]
    Runtime(String),
}

impl Error {
    /// 1 for user or configuration errors, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Embedding(_) | Error::Runtime(_) => 2,
            _ => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Config(_) | Error::Curation(_) | Error::Template(_) => "config",
            Error::Label(_) => "reference",
            Error::Metrics(_) => "metrics",
            Error::Dataset { .. } => "dataset",
            Error::MissingAuth { .. } => "auth",
            Error::Usage(_) => "usage",
            Error::Io { .. } => "io",
            Error::Embedding(_) => "embedding",
            Error::Cluster(_) => "clustering",
            Error::Runtime(_) => "runtime",
        }
    }
}

pub(crate) trait IoContext<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T, Error>;
}

impl<T> IoContext<T> for Result<T, std::io::Error> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T, Error> {
        self.map_err(|source| Error::Io { path: path.into(), source })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
