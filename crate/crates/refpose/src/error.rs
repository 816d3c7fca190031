use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("view {0} has no pose")]
    MissingPose(String),
    #[error("view {id} has an invalid pose: {source}")]
    InvalidPose {
        id: String,
        source: refpose_core::Error,
    },
    #[error("view {id} has inconsistent intrinsics: {source}")]
    InconsistentIntrinsics {
        id: String,
        source: refpose_core::Error,
    },
    #[error("query ids differ between predictions and ground truth: {0}")]
    IdMismatch(String),
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] refpose_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for configuration problems, 3 for everything about the data.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config(_) | Error::Core(refpose_core::Error::InvalidConfig(_)) => 2,
            _ => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "ParseError",
            Error::MissingPose(_) => "MissingPose",
            Error::InvalidPose { .. } => "InvalidPose",
            Error::InconsistentIntrinsics { .. } => "InconsistentIntrinsics",
            Error::IdMismatch(_) => "IdMismatch",
            Error::Config(_) => "ConfigError",
            Error::Io { .. } => "IoError",
            Error::Core(refpose_core::Error::InvalidConfig(_)) => "ConfigError",
            Error::Core(_) => "DataError",
        }
    }
}
