use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty color set")]
    EmptyColorSet,

    #[error("palette size {0} is outside 1..=16")]
    InvalidPaletteSize(usize),

    #[error("palette size mismatch: expected {expected}, found {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("empty palette set")]
    EmptyPaletteSet,

    #[error("color component out of range: {0:?}")]
    ColorOutOfRange([f64; 3]),

    #[error("cost matrix must be square, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },

    #[error("cost matrix contains non-finite entries")]
    NonFiniteCost,

    #[error("need at least {needed} palettes, got {got}")]
    TooFewPalettes { needed: usize, got: usize },

    #[error("image has a zero dimension")]
    EmptyImage,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("kernel matrix is not positive definite even with jitter {jitter:e}")]
    NotPositiveDefinite { jitter: f64 },

    #[error("objective became non-finite: {0}")]
    NonFinite(String),

    #[error("no usable images in manifest")]
    NoUsableImages,

    #[error("unsupported format: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
