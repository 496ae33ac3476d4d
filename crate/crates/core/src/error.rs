use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the simulator, the analysis pipeline and the file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("regions overlap: {0} and {1}")]
    RegionOverlap(String, String),

    #[error("no net reference signal: n_ref = {n_ref:.6e} <= dn_noise = {dn_noise:.6e}")]
    NoNetSignal { n_ref: f64, dn_noise: f64 },

    #[error("no qualifying pixels: {0}")]
    NoQualifyingPixels(String),

    #[error("statistics error: {0}")]
    Statistics(String),

    #[error("malformed frame file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("missing report inputs: {}", .0.join(", "))]
    MissingInputs(Vec<String>),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 for usage errors, 2 for data/statistics errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse(_) | Error::Geometry(_) | Error::RegionOverlap(..) => 1,
            Error::Domain(_)
            | Error::Empty(_)
            | Error::NoNetSignal { .. }
            | Error::NoQualifyingPixels(_)
            | Error::Statistics(_)
            | Error::Format { .. }
            | Error::MissingInputs(_)
            | Error::Io { .. } => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
