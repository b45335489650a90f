use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the pipeline can report.
///
/// [`Error::name`] gives a stable identifier for machine-readable output.
#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),
    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("frame rate missing or not positive")]
    MissingFps,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("png error: {0}")]
    Png(String),
    #[error("window must hold exactly 3 samples, got {0}")]
    BadWindowLength(usize),
    #[error("wavelet scale must be positive, got {0}")]
    NonPositiveScale(f64),
    #[error("no parameter set in the grid satisfies the periodic/aperiodic dichotomy")]
    NoParamsFound,
    #[error("need at least 3 frames, got {0}")]
    TooFewFrames(usize),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("pixel ({row}, {col}) outside {height}x{width} frame")]
    OutOfBounds {
        row: usize,
        col: usize,
        height: usize,
        width: usize,
    },
    #[error("invalid band [{lo}, {hi}] Hz for sampling rate {fs} Hz")]
    InvalidBand { lo: f64, hi: f64, fs: f64 },
    #[error("series sampled at {series} Hz but filter designed for {filter} Hz")]
    FsMismatch { series: f64, filter: f64 },
    #[error("series too short: need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("no spectral peak in band")]
    NoPeak,
    #[error("no usable pixels in heart-rate field")]
    EmptyField,
    #[error("no heart-rate consensus: mode bin holds {fraction:.4} of pixels, need {required:.4}")]
    NoConsensus { fraction: f64, required: f64 },
    #[error("empty input")]
    Empty,
    #[error("patch leaves the frame at frame {frame}")]
    PatchOutOfBounds { frame: usize },
    #[error("frame index {index} out of range for {count} frames")]
    OutOfRange { index: usize, count: usize },
}

impl Error {
    pub fn name(&self) -> &'static str {
        match self {
            Error::MissingFile(_) => "MissingFile",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::MissingFps => "MissingFps",
            Error::InvalidInput(_) => "InvalidInput",
            Error::Io(_) => "IoFailure",
            Error::Json(_) => "InvalidJson",
            Error::Png(_) => "InvalidPng",
            Error::BadWindowLength(_) => "BadWindowLength",
            Error::NonPositiveScale(_) => "NonPositiveScale",
            Error::NoParamsFound => "NoParamsFound",
            Error::TooFewFrames(_) => "TooFewFrames",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::OutOfBounds { .. } => "OutOfBounds",
            Error::InvalidBand { .. } => "InvalidBand",
            Error::FsMismatch { .. } => "FsMismatch",
            Error::TooShort { .. } => "TooShort",
            Error::NoPeak => "NoPeak",
            Error::EmptyField => "EmptyField",
            Error::NoConsensus { .. } => "NoConsensus",
            Error::Empty => "Empty",
            Error::PatchOutOfBounds { .. } => "PatchOutOfBounds",
            Error::OutOfRange { .. } => "OutOfRange",
        }
    }

    /// True when the failure means "the video carries no heart-rate signal"
    /// rather than bad input or a bug.
    pub fn is_no_signal(&self) -> bool {
        matches!(
            self,
            Error::EmptyField | Error::NoConsensus { .. } | Error::NoPeak
        )
    }
}
