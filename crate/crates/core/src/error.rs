use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// One repetition of an ensemble that blew up.
#[derive(Debug, Clone, PartialEq)]
pub struct DivergedRun {
    pub repetition: usize,
    pub seed: u64,
    pub iteration: usize,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid problem spec: {0}")]
    InvalidSpec(String),

    #[error("problem construction failed: {0}")]
    Construction(String),

    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("row {row} out of range 0..{rows}")]
    RowOutOfRange { row: usize, rows: usize },

    #[error("row {0} of A is zero; the Kaczmarz projection is undefined")]
    ZeroRow(usize),

    #[error("invalid step schedule: {0}")]
    InvalidSchedule(String),

    #[error("method {0} requires a step schedule")]
    MissingSchedule(&'static str),

    #[error("iterate diverged at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("{} of {total} repetitions diverged (first: repetition {} seed {} at iteration {})",
        .runs.len(), .runs[0].repetition, .runs[0].seed, .runs[0].iteration)]
    EnsembleDiverged { runs: Vec<DivergedRun>, total: usize },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    #[error("phase fit: {0}")]
    PhaseFit(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(String),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the CLI: 1 config, 2 divergence, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Diverged { .. } | Error::EnsembleDiverged { .. } => 2,
            Error::Io { .. } | Error::Csv(_) => 3,
            _ => 1,
        }
    }
}
