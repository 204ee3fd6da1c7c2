use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("non-finite gradient in layer {layer}")]
    NonFiniteGradient { layer: usize },

    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: u64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("insufficient data: need at least {needed} rows, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("divergence is infinite: {0}")]
    InfiniteDivergence(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("{kind} at byte {offset}: {message}")]
    Parse {
        kind: ParseErrorKind,
        offset: usize,
        message: String,
    },

    #[error("format version error: {0}")]
    Version(String),

    #[error("corrupt file: {0}")]
    Corrupt(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParseErrorKind {
    BadMagic,
    UnsupportedType,
    Truncated,
    TrailingBytes,
}

impl std::fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ParseErrorKind::BadMagic => "bad magic",
            ParseErrorKind::UnsupportedType => "unsupported type",
            ParseErrorKind::Truncated => "truncated payload",
            ParseErrorKind::TrailingBytes => "trailing bytes",
        })
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
