use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument `{field}`: {reason}")]
    InvalidArgument { field: &'static str, reason: String },

    #[error("target T60 {target_s:.4} s is unreachable for this room; minimum achievable T60 is {min_s:.4} s")]
    UnreachableT60 { target_s: f64, min_s: f64 },

    #[error("room has zero total absorption; T60 is infinite")]
    InfiniteT60,

    #[error("scene is not a closed volume")]
    NotClosed,

    #[error("impulse response channel {channel} is silent")]
    SilentIr { channel: usize },

    #[error("energy decay never reaches -35 dB (deepest level {deepest_db:.2} dB)")]
    InsufficientDecay { deepest_db: f64 },

    #[error("impulse response metadata lacks {0}")]
    MetadataRequired(&'static str),

    #[error("IR length {ir_length_s:.4} s is shorter than the direct-path delay {delay_s:.4} s")]
    IrTooShort { ir_length_s: f64, delay_s: f64 },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("sample rate mismatch: {left} Hz vs {right} Hz")]
    RateMismatch { left: u32, right: u32 },

    #[error("signal is silent; SNR is undefined")]
    SilentSignal,

    #[error("rejection sampling failed after {attempts} attempts: {what}")]
    SamplingFailed { attempts: usize, what: &'static str },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
