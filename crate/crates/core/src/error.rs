use thiserror::Error;

use crate::raster::BoundingBox;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid box {bbox:?} for a {width}x{height} image")]
    InvalidBox {
        bbox: BoundingBox,
        width: u32,
        height: u32,
    },

    #[error("point ({x}, {y}) lies outside the {width}x{height} frame")]
    CoordinateOutOfRange {
        x: f64,
        y: f64,
        width: u32,
        height: u32,
    },

    #[error("invalid raster: {0}")]
    InvalidRaster(String),

    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (u32, u32),
        found: (u32, u32),
    },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("mask has no background pixel")]
    NoBackground,

    #[error("no foreground markers above threshold")]
    EmptyMarkers,

    #[error("degenerate mixture model: {0}")]
    ModelDegenerate(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("invalid scene spec: {0}")]
    InvalidSpec(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
