use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse error classes, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes, counts or references that do not line up.
    #[error("structural error: {0}")]
    Structural(String),

    /// A file (or in-memory document) failed to parse or validate.
    #[error("{source_name}: {message}")]
    Load { source_name: String, message: String },

    #[error("camera fit failed: {0}")]
    CameraFit(String),

    #[error("alignment failed: {0}")]
    Alignment(String),

    #[error("noise injection failed: {0}")]
    Noise(String),

    #[error("lift failed: {0}")]
    Lift(String),

    #[error("frame {frame}: {source}")]
    Frame {
        frame: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("[{stage}] {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn load(source_name: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Load {
            source_name: source_name.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_frame(self, frame: usize) -> Self {
        Error::Frame {
            frame,
            source: Box::new(self),
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) => ErrorClass::Config,
            Error::Structural(_) | Error::Load { .. } | Error::Io { .. } => ErrorClass::Data,
            Error::CameraFit(_) | Error::Alignment(_) | Error::Noise(_) | Error::Lift(_) => {
                ErrorClass::Numerical
            }
            Error::Frame { source, .. } | Error::Stage { source, .. } => source.class(),
        }
    }
}
