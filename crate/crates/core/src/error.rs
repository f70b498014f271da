use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown family `{0}`")]
    UnknownFamily(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid pmf: {0}")]
    InvalidPmf(String),

    #[error("window of {requested} points exceeds the cap of {cap}")]
    WindowCap { requested: usize, cap: usize },

    #[error("direct convolution would produce {requested} points (cap {cap}); use the fft tier")]
    DirectCapExceeded { requested: usize, cap: usize },

    #[error("tail mass {tail_mass:e} cannot be certified: {reason}")]
    UncertifiableTail { tail_mass: f64, reason: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unknown check id `{0}`")]
    UnknownCheck(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
