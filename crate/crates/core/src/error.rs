use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("invalid RF frame: {0}")]
    Frame(String),

    #[error("invalid imaging grid: {0}")]
    Grid(String),

    #[error("invalid phantom: {0}")]
    Phantom(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// A `key=value` run configuration could not be parsed.
    #[error("config line {line}: {msg}")]
    ConfigLine { line: usize, msg: String },

    #[error("config is missing required key `{0}`")]
    MissingKey(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("signal is identically zero: {0}")]
    ZeroSignal(String),

    /// A metric could not be evaluated on the given data.
    #[error("metric error: {0}")]
    Metric(String),

    #[error("{path}: bad magic bytes (expected \"PARF\")")]
    BadMagic { path: PathBuf },

    #[error("{path}: unsupported format version {found} (expected {expected})")]
    VersionMismatch { path: PathBuf, found: u32, expected: u32 },

    #[error("{path}: payload is {actual} bytes, header implies {expected}")]
    PayloadLength { path: PathBuf, expected: u64, actual: u64 },

    #[error("{path}: malformed file: {msg}")]
    Malformed { path: PathBuf, msg: String },

    #[error("missing image data for method(s): {0}")]
    MissingMethods(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Coarse classification used for process exit codes.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Numerical(_) | Error::ZeroSignal(_) | Error::Metric(_) => ErrorKind::Numerical,
            Error::BadMagic { .. }
            | Error::VersionMismatch { .. }
            | Error::PayloadLength { .. }
            | Error::Malformed { .. }
            | Error::MissingMethods(_)
            | Error::Io { .. } => ErrorKind::Io,
            _ => ErrorKind::Config,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Numerical,
    Io,
}
