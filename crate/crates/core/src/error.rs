use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value violates a documented invariant. `key` is a dotted locator.
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },

    #[error("missing required key `{key}`")]
    MissingKey { key: String },

    #[error("unknown key `{key}`")]
    UnknownKey { key: String },

    #[error("conflicting keys: {0}")]
    Conflict(String),

    #[error("{path}: line {line}: {reason}")]
    WeatherRow {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("{path}: expected {expected} data rows, found {found}")]
    SampleCount {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("simulation failed at p/h = {ph}, M_L = {ml}: {source}")]
    AtCell {
        ph: f64,
        ml: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed grid file: {0}")]
    Grid(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Parse(String),
}

impl Error {
    pub fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by user input rather than by the simulation.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Invalid { .. }
            | Error::MissingKey { .. }
            | Error::UnknownKey { .. }
            | Error::Conflict(_)
            | Error::WeatherRow { .. }
            | Error::SampleCount { .. }
            | Error::Parse(_)
            | Error::Grid(_) => true,
            Error::AtCell { source, .. } => source.is_validation(),
            Error::Degenerate(_) | Error::Io { .. } => false,
        }
    }
}
