use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse failure class, used for CLI exit codes and machine-readable errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Io,
    Format,
    Config,
    Dimension,
}

impl ErrorCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::Io => "io",
            ErrorCategory::Format => "format",
            ErrorCategory::Config => "config",
            ErrorCategory::Dimension => "dimension",
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("not a feature file")]
    NotFeatureFile,
    #[error("not a mask file")]
    NotMaskFile,
    #[error("unsupported {what} {value}")]
    Unsupported { what: &'static str, value: u32 },
    #[error("length mismatch: expected {expected} payload bytes, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("label out of range: {label} >= {num_classes}")]
    LabelOutOfRange { label: u16, num_classes: u16 },
    #[error("malformed manifest {path}: {message}")]
    MalformedManifest { path: PathBuf, message: String },
    #[error("manifest references missing path {0}")]
    DanglingPath(PathBuf),
    #[error("palette gap: no entry for label {0}")]
    PaletteGap(u16),
    #[error("palette has {palette} entries but {path} declares {num_classes} classes")]
    PaletteTooSmall {
        path: PathBuf,
        palette: usize,
        num_classes: u16,
    },
    #[error("frame order not strictly increasing in video {video} at index {index}")]
    FrameOrder { video: String, index: u64 },
    #[error("{0}: file name is not a frame index")]
    BadFrameName(PathBuf),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("no reference frames")]
    EmptyMemory,
    #[error("class count mismatch: expected {expected}, found {found}")]
    ClassCount { expected: usize, found: usize },
    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Io { .. } | Error::DanglingPath(_) => ErrorCategory::Io,
            Error::Config(_) => ErrorCategory::Config,
            Error::Dimension(_) | Error::ClassCount { .. } | Error::EmptyMemory => {
                ErrorCategory::Dimension
            }
            _ => ErrorCategory::Format,
        }
    }
}
