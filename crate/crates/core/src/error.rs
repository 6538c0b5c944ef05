use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse grouping used by the command line to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorCategory {
    Io,
    Format,
    Config,
    InsufficientPeaks,
}

impl ErrorCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::Io => "io",
            ErrorCategory::Format => "format",
            ErrorCategory::Config => "config",
            ErrorCategory::InsufficientPeaks => "insufficient_peaks",
        }
    }
}

impl std::fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("io: {0}")]
    Io(#[from] io::Error),

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("record {record}: {message}")]
    MalformedRecord { record: usize, message: String },

    #[error("record {record}: polarity {value} is not -1 or 1")]
    InvalidPolarity { record: usize, value: i64 },

    #[error("record {record}: timestamp decreased ({previous} -> {current})")]
    TimestampRegression {
        record: usize,
        previous: u64,
        current: u64,
    },

    #[error("record {record}: event ({x},{y}) outside {width}x{height} sensor")]
    EventOutOfBounds {
        record: usize,
        x: u32,
        y: u32,
        width: u32,
        height: u32,
    },

    #[error("truncated binary payload: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },

    #[error("geometry {width}x{height} exceeds the binary format's u16 range")]
    GeometryTooLarge { width: u32, height: u32 },

    #[error("geometry: {width}x{height} must have positive dimensions")]
    InvalidGeometry { width: u32, height: u32 },

    #[error("roi: {0}")]
    InvalidRoi(String),

    #[error("{field}: {message}")]
    InvalidParameter {
        field: &'static str,
        message: String,
    },

    #[error("template side {template} does not match frame side {frames}")]
    DimensionMismatch { template: u32, frames: u32 },

    #[error("template index {index} out of range for {len} frames")]
    TemplateOutOfRange { index: usize, len: usize },

    #[error("fewer than 2 peaks in the correlation response (found {found})")]
    InsufficientPeaks { found: usize },
}

impl Error {
    pub fn parameter(field: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            message: message.into(),
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Io(_) => ErrorCategory::Io,
            Error::MalformedHeader(_)
            | Error::MalformedRecord { .. }
            | Error::InvalidPolarity { .. }
            | Error::TimestampRegression { .. }
            | Error::EventOutOfBounds { .. }
            | Error::Truncated { .. }
            | Error::GeometryTooLarge { .. } => ErrorCategory::Format,
            Error::InvalidGeometry { .. }
            | Error::InvalidRoi(_)
            | Error::InvalidParameter { .. }
            | Error::DimensionMismatch { .. }
            | Error::TemplateOutOfRange { .. } => ErrorCategory::Config,
            Error::InsufficientPeaks { .. } => ErrorCategory::InsufficientPeaks,
        }
    }
}
