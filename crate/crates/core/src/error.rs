//! Error type shared by all pipeline stages.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input too short: got {got} samples, need at least {need}")]
    TooShort { got: usize, need: usize },

    #[error("channel count mismatch: expected {expected}, got {got}")]
    ChannelMismatch { expected: usize, got: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty frame range")]
    EmptyFrameRange,

    #[error("empty dictionary")]
    EmptyDictionary,

    #[error("reference signal has zero energy")]
    ZeroReference,

    #[error("dictionary file format: {0}")]
    DictionaryFormat(String),

    #[error("fingerprint mismatch: dictionary has {dictionary}, session has {session}")]
    FingerprintMismatch { dictionary: String, session: String },

    #[error("scene spec parse error at line {line}: {message}")]
    SceneSpecParse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
