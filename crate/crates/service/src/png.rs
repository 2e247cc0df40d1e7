use image::{ExtendedColorType, ImageEncoder};

use infinicity_core::camsample::label_walkable;
use infinicity_core::satmap::encode_category;
use infinicity_core::{CdnTile, Palette};

use crate::ServiceError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layer {
    /// Palette colors, RGB8.
    Category,
    /// Meters, 16-bit gray.
    Height,
    /// `(n + 1) / 2` per channel, RGB8.
    Normal,
    /// Ground-level walkable pixels, 8-bit gray 0 or 255.
    Walkable,
}

impl std::str::FromStr for Layer {
    type Err = ServiceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "category" => Ok(Layer::Category),
            "height" => Ok(Layer::Height),
            "normal" => Ok(Layer::Normal),
            "walkable" => Ok(Layer::Walkable),
            _ => Err(ServiceError::BadRequest(format!(
                "unknown layer {s:?}; expected category, height, normal or walkable"
            ))),
        }
    }
}

pub fn encode_png(pixels: &[u8], width: u32, height: u32, color: ExtendedColorType) -> Vec<u8> {
    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new(&mut out)
        .write_image(pixels, width, height, color)
        .expect("buffer matches dimensions");
    out
}

fn unit_to_u8(c: f64) -> u8 {
    (c.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn layer_png(tile: &CdnTile, layer: Layer, palette: &Palette) -> Result<Vec<u8>, ServiceError> {
    let (w, h) = (tile.width() as u32, tile.height() as u32);
    Ok(match layer {
        Layer::Category => {
            let rgb = encode_category(&tile.category, palette)
                .map_err(|e| ServiceError::BadRequest(e.to_string()))?;
            let bytes: Vec<u8> = rgb.as_slice().iter().flat_map(|c| c.map(unit_to_u8)).collect();
            encode_png(&bytes, w, h, ExtendedColorType::Rgb8)
        }
        Layer::Height => {
            // PNG stores 16-bit samples big-endian
            let bytes: Vec<u8> = tile.height_m.as_slice().iter().flat_map(|v| v.to_be_bytes()).collect();
            encode_png(&bytes, w, h, ExtendedColorType::L16)
        }
        Layer::Normal => {
            let bytes: Vec<u8> = tile
                .normal
                .as_slice()
                .iter()
                .flat_map(|n| n.map(|c| unit_to_u8((c as f64 + 1.0) / 2.0)))
                .collect();
            encode_png(&bytes, w, h, ExtendedColorType::Rgb8)
        }
        Layer::Walkable => {
            let mask = label_walkable(tile, palette, (0, 0));
            let bytes: Vec<u8> = mask.mask.as_slice().iter().map(|&b| if b { 255 } else { 0 }).collect();
            encode_png(&bytes, w, h, ExtendedColorType::L8)
        }
    })
}
