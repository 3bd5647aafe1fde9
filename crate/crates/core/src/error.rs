use std::path::PathBuf;

use thiserror::Error;

use crate::nnet::checkpoint::Checkpoint;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing input: {0}")]
    MissingInput(PathBuf),

    #[error("output {0} already exists (pass --force to overwrite)")]
    OutputExists(PathBuf),

    #[error("format error: {0}")]
    Format(String),

    #[error("unsupported encoding: {0}")]
    UnsupportedEncoding(String),

    #[error("non-finite sample at index {0}")]
    NonFiniteSample(usize),

    #[error("length error: {0}")]
    Length(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("non-finite gradient in parameter `{name}` (first bad index {index})")]
    NonFiniteGradient { name: String, index: usize },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("training aborted at epoch {epoch}, step {step}: {reason}")]
    TrainingAborted {
        epoch: usize,
        step: usize,
        reason: String,
        last_good: Option<Box<Checkpoint>>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short stable identifier used in machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::MissingInput(_) => "missing_input",
            Error::OutputExists(_) => "output_exists",
            Error::Format(_) => "format",
            Error::UnsupportedEncoding(_) => "unsupported_encoding",
            Error::NonFiniteSample(_) => "non_finite_sample",
            Error::Length(_) => "length",
            Error::Config(_) => "config",
            Error::Dimension(_) => "dimension",
            Error::Data(_) => "data",
            Error::NonFiniteGradient { .. } => "non_finite_gradient",
            Error::Checkpoint(_) => "checkpoint",
            Error::TrainingAborted { .. } => "training_aborted",
        }
    }
}
