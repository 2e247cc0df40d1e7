//! Co-registered category / height / normal rasters and the operations that
//! clean and (de)serialise them.

mod bilateral;
mod icdn;
mod palette;
mod raster;
mod tile;

pub use bilateral::{bilateral_filter, default_clean, default_schedule, BilateralPass};
pub use icdn::{decode_tile, encode_tile, ICDN_HEADER_LEN, ICDN_MAGIC, ICDN_VERSION};
pub use palette::{classes, decode_category, encode_category, ClassId, Palette, PaletteClass};
pub use raster::Raster;
pub use tile::{
    canonical_normal, dequantize_normal, quantize_normal, CdnTile, NORMAL_ONE, UP,
    WORLD_HEIGHT_CAP,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SatmapError {
    #[error("palette is empty")]
    EmptyPalette,
    #[error("duplicate class id {0} in palette")]
    DuplicateClass(ClassId),
    #[error("classes {0} and {1} share a display color")]
    DuplicateColor(ClassId, ClassId),
    #[error("color component of class {0} outside [0, 1]")]
    ColorRange(ClassId),
    #[error("bilateral filter needs at least one pass")]
    NoPasses,
    #[error("bilateral sigma must be positive and finite, got {0}")]
    InvalidSigma(f64),
    #[error("class id {0} is not in the palette")]
    UnknownClass(ClassId),
    #[error("raster dimensions disagree: {0}")]
    Shape(String),
    #[error("tile invariant violated: {0}")]
    Invariant(String),
    #[error("malformed tile at byte {offset}: {message}")]
    Format { offset: usize, message: String },
    #[error("palette file: {0}")]
    PaletteFile(String),
}
