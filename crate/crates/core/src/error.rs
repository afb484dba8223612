use std::path::PathBuf;

/// Errors produced by the analytics engine.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {reason}")]
    UnreadableFile { path: PathBuf, reason: String },
    #[error("unsupported raster layout: {0}")]
    UnsupportedLayout(String),
    #[error("raster has no georeference")]
    MissingGeoreference,
    #[error("selection does not intersect the raster extent")]
    EmptyIntersection,
    #[error("invalid value range: lo {lo} > hi {hi}")]
    InvalidRange { lo: f64, hi: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("failed to write catalog index: {0}")]
    IndexWriteFailure(String),
    #[error("no scene matches the selection")]
    EmptySelection,
    #[error("product does not support export as {0}")]
    UnsupportedFormat(String),
    #[error("cell corner is nodata")]
    NodataCorner,
    #[error("grid must be at least 2x2 for contouring")]
    DegenerateGrid,
    #[error("empty input")]
    EmptyInput,
    #[error("{count} observations exceed the dense limit of {limit}")]
    TooLarge { count: usize, limit: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("raster contains only nodata")]
    AllNodata,
    #[error("point ({lon}, {lat}) is outside the raster extent")]
    OutOfExtent { lon: f64, lat: f64 },
    #[error("pixel is nodata")]
    NoData,
    #[error("not found: {0}")]
    NotFound(String),
    #[error("ambiguous boundaries at one level: {0}")]
    AmbiguousBoundaries(String),
    #[error("invalid GeoJSON: {0}")]
    InvalidGeoJson(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by the caller's input rather than the environment.
    pub fn is_precondition(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::IndexWriteFailure(_) | Error::UnreadableFile { .. })
    }

    /// Stable short name used in API error bodies.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::UnreadableFile { .. } => "UnreadableFile",
            Error::UnsupportedLayout(_) => "UnsupportedLayout",
            Error::MissingGeoreference => "MissingGeoreference",
            Error::EmptyIntersection => "EmptyIntersection",
            Error::InvalidRange { .. } => "InvalidRange",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::IndexWriteFailure(_) => "IndexWriteFailure",
            Error::EmptySelection => "EmptySelection",
            Error::UnsupportedFormat(_) => "UnsupportedFormat",
            Error::NodataCorner => "NodataCorner",
            Error::DegenerateGrid => "DegenerateGrid",
            Error::EmptyInput => "EmptyInput",
            Error::TooLarge { .. } => "TooLarge",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::AllNodata => "AllNodata",
            Error::OutOfExtent { .. } => "OutOfExtent",
            Error::NoData => "NoData",
            Error::NotFound(_) => "NotFound",
            Error::AmbiguousBoundaries(_) => "AmbiguousBoundaries",
            Error::InvalidGeoJson(_) => "InvalidGeoJson",
            Error::Io(_) => "Io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
