//! `.icdn` tile files.
//!
//! Layout (little-endian):
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 4    | magic `ICDN`                            |
//! | 4      | 2    | version (1)                             |
//! | 6      | 2    | reserved, zero                          |
//! | 8      | 4    | width                                   |
//! | 12     | 4    | height                                  |
//! | 16     | 8    | palette hash                            |
//! | 24     | w·h  | category plane, u8 class ids            |
//! |        | 2·w·h| height plane, u16 meters                |
//! |        | 6·w·h| normal plane, i16 xyz, 1.0 = 32767       |

use super::tile::{canonical_quantized, is_canonical_quantized};
use super::{dequantize_normal, CdnTile, Raster, SatmapError, WORLD_HEIGHT_CAP};

pub const ICDN_MAGIC: &[u8; 4] = b"ICDN";
pub const ICDN_VERSION: u16 = 1;
pub const ICDN_HEADER_LEN: usize = 24;

pub fn encode_tile(tile: &CdnTile, palette_hash: u64) -> Vec<u8> {
    let (w, h) = (tile.width(), tile.height());
    let mut out = Vec::with_capacity(ICDN_HEADER_LEN + 9 * w * h);
    out.extend_from_slice(ICDN_MAGIC);
    out.extend_from_slice(&ICDN_VERSION.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&(w as u32).to_le_bytes());
    out.extend_from_slice(&(h as u32).to_le_bytes());
    out.extend_from_slice(&palette_hash.to_le_bytes());
    out.extend_from_slice(tile.category.as_slice());
    for v in tile.height_m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for n in tile.normal.as_slice() {
        let q = canonical_quantized(*n).unwrap_or([0, 0, 32767]);
        for c in q {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], SatmapError> {
        if self.bytes.len() - self.pos < n {
            return Err(SatmapError::Format {
                offset: self.bytes.len(),
                message: format!("truncated while reading {what}"),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16, SatmapError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32, SatmapError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

/// Parses a tile and returns it with the palette hash from its header.
pub fn decode_tile(bytes: &[u8]) -> Result<(CdnTile, u64), SatmapError> {
    let fmt = |offset, message: String| SatmapError::Format { offset, message };
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != ICDN_MAGIC {
        return Err(fmt(0, "bad magic".into()));
    }
    let version = r.u16("version")?;
    if version != ICDN_VERSION {
        return Err(fmt(4, format!("unsupported version {version}")));
    }
    if r.u16("reserved")? != 0 {
        return Err(fmt(6, "reserved field must be zero".into()));
    }
    let w = r.u32("width")? as usize;
    let h = r.u32("height")? as usize;
    let hash = u64::from_le_bytes(r.take(8, "palette hash")?.try_into().unwrap());
    let n = w
        .checked_mul(h)
        .filter(|n| n.checked_mul(9).is_some_and(|b| b <= bytes.len()))
        .ok_or_else(|| fmt(8, format!("dimensions {w}x{h} exceed file size")))?;

    let category = r.take(n, "category plane")?.to_vec();
    let mut heights = Vec::with_capacity(n);
    for _ in 0..n {
        let at = r.pos;
        let v = r.u16("height plane")?;
        if v > WORLD_HEIGHT_CAP {
            return Err(fmt(at, format!("height {v} exceeds cap")));
        }
        heights.push(v);
    }
    let mut normals = Vec::with_capacity(n);
    for _ in 0..n {
        let at = r.pos;
        let raw = r.take(6, "normal plane")?;
        let q = [0, 2, 4].map(|k| i16::from_le_bytes([raw[k], raw[k + 1]]));
        if !is_canonical_quantized(q) {
            return Err(fmt(at, format!("non-canonical normal {q:?}")));
        }
        normals.push(dequantize_normal(q).expect("canonical normals are nonzero"));
    }
    if r.pos != bytes.len() {
        return Err(fmt(r.pos, "trailing bytes".into()));
    }
    let tile = CdnTile {
        category: Raster::from_vec(w, h, category).unwrap(),
        height_m: Raster::from_vec(w, h, heights).unwrap(),
        normal: Raster::from_vec(w, h, normals).unwrap(),
    };
    Ok((tile, hash))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::satmap::canonical_normal;
    use proptest::prelude::*;

    fn sample_tile() -> CdnTile {
        CdnTile {
            category: Raster::from_fn(5, 3, |x, y| (x + y) as u8),
            height_m: Raster::from_fn(5, 3, |x, y| (x * 7 + y) as u16),
            normal: Raster::from_fn(5, 3, |x, y| {
                canonical_normal([x as f32 * 0.1, y as f32 * -0.2, 1.0])
            }),
        }
    }

    #[test]
    fn header_layout() {
        let bytes = encode_tile(&sample_tile(), 0xDEAD_BEEF);
        assert_eq!(&bytes[..4], b"ICDN");
        assert_eq!(bytes.len(), ICDN_HEADER_LEN + 15 * 9);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 5);
        assert_eq!(u64::from_le_bytes(bytes[16..24].try_into().unwrap()), 0xDEAD_BEEF);
    }

    #[test]
    fn canonical_tile_round_trips_exactly() {
        let t = sample_tile();
        let bytes = encode_tile(&t, 7);
        let (back, hash) = decode_tile(&bytes).unwrap();
        assert_eq!(hash, 7);
        assert_eq!(back, t);
        assert_eq!(encode_tile(&back, 7), bytes);
    }

    #[test]
    fn truncated_and_garbage_inputs_error() {
        let bytes = encode_tile(&sample_tile(), 1);
        for cut in [0, 3, 10, 24, 30, bytes.len() - 1] {
            assert!(matches!(
                decode_tile(&bytes[..cut]),
                Err(SatmapError::Format { .. })
            ));
        }
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_tile(&extra).is_err());
        let mut zero_normal = bytes.clone();
        let start = bytes.len() - 6;
        zero_normal[start..].fill(0);
        match decode_tile(&zero_normal) {
            Err(SatmapError::Format { offset, .. }) => assert_eq!(offset, start),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn bytes_tile_bytes_is_identity(seed in any::<u64>(), w in 1usize..9, h in 1usize..9) {
            let mut s = seed;
            let mut next = || { s = crate::hash::mix64(s); s };
            let tile = CdnTile {
                category: Raster::from_fn(w, h, |_, _| (next() % 12) as u8),
                height_m: Raster::from_fn(w, h, |_, _| (next() % 64) as u16),
                normal: Raster::from_fn(w, h, |_, _| {
                    let v = [0, 1, 2].map(|_| (crate::hash::unit_f64(next()) * 2.0 - 1.0) as f32);
                    canonical_normal(v)
                }),
            };
            let bytes = encode_tile(&tile, seed);
            let (back, _) = decode_tile(&bytes).unwrap();
            prop_assert_eq!(&back, &tile);
            prop_assert_eq!(encode_tile(&back, seed), bytes);
        }
    }
}
