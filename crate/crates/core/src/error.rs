use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller passed inconsistent shapes, indices or configuration.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("bad magic: expected {expected:?}")]
    BadMagic { expected: &'static str },

    #[error("unsupported version {found} (expected {expected})")]
    UnsupportedVersion { found: u8, expected: u8 },

    #[error("truncated input while reading {0}")]
    Truncated(&'static str),

    #[error("invalid data: {0}")]
    Invalid(String),

    #[error("symbol {symbol} at (c={c}, k={k}, l={l}) is outside the alphabet [{y_min}, {y_max}]")]
    SymbolOutOfAlphabet {
        symbol: i32,
        c: usize,
        k: usize,
        l: usize,
        y_min: i32,
        y_max: i32,
    },

    #[error("model hash mismatch: stream was encoded with a different CDF table set")]
    ModelMismatch,

    #[error("non-finite rate loss produced by prior {prior}, channel {channel}")]
    NonFinite { prior: usize, channel: usize },

    #[error("training diverged: validation rate {rate:.4} > 2x initial {initial:.4} for 3 consecutive tests")]
    Diverged { rate: f64, initial: f64 },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// Process exit status for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            Error::NonFinite { .. } | Error::Diverged { .. } => 4,
            _ => 3,
        }
    }
}
