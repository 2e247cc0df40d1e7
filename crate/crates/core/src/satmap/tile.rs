use super::{classes, ClassId, Raster, SatmapError};

/// Heights are meters above ground, one voxel per meter, capped at one block.
pub const WORLD_HEIGHT_CAP: u16 = 64;

/// Fixed-point scale of the normal plane in `.icdn` files.
pub const NORMAL_ONE: f64 = 32767.0;

pub const UP: [f32; 3] = [0.0, 0.0, 1.0];

/// Aligned category, height and normal rasters for one map region.
#[derive(Clone, Debug, PartialEq)]
pub struct CdnTile {
    pub category: Raster<ClassId>,
    pub height_m: Raster<u16>,
    pub normal: Raster<[f32; 3]>,
}

impl CdnTile {
    /// All-void tile: height 0, normals +z.
    pub fn void(width: usize, height: usize) -> Self {
        Self {
            category: Raster::filled(width, height, classes::VOID),
            height_m: Raster::filled(width, height, 0),
            normal: Raster::filled(width, height, UP),
        }
    }

    pub fn new(
        category: Raster<ClassId>,
        height_m: Raster<u16>,
        normal: Raster<[f32; 3]>,
    ) -> Result<Self, SatmapError> {
        let tile = Self {
            category,
            height_m,
            normal,
        };
        tile.validate()?;
        Ok(tile)
    }

    pub fn width(&self) -> usize {
        self.category.width()
    }

    pub fn height(&self) -> usize {
        self.category.height()
    }

    /// Checks shape agreement, the height cap and unit normals.
    pub fn validate(&self) -> Result<(), SatmapError> {
        if !self.category.same_shape(&self.height_m) || !self.category.same_shape(&self.normal) {
            return Err(SatmapError::Shape(format!(
                "category {}x{}, height {}x{}, normal {}x{}",
                self.category.width(),
                self.category.height(),
                self.height_m.width(),
                self.height_m.height(),
                self.normal.width(),
                self.normal.height()
            )));
        }
        if let Some(h) = self.height_m.as_slice().iter().find(|&&h| h > WORLD_HEIGHT_CAP) {
            return Err(SatmapError::Invariant(format!(
                "height {h} exceeds cap {WORLD_HEIGHT_CAP}"
            )));
        }
        for n in self.normal.as_slice() {
            let len = norm(n);
            if (len - 1.0).abs() > 1e-6 {
                return Err(SatmapError::Invariant(format!("normal {n:?} has length {len}")));
            }
        }
        Ok(())
    }

    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Self {
        Self {
            category: self.category.crop(x0, y0, w, h),
            height_m: self.height_m.crop(x0, y0, w, h),
            normal: self.normal.crop(x0, y0, w, h),
        }
    }

    pub fn blit(&mut self, src: &CdnTile, x0: usize, y0: usize) {
        self.category.blit(&src.category, x0, y0);
        self.height_m.blit(&src.height_m, x0, y0);
        self.normal.blit(&src.normal, x0, y0);
    }
}

fn norm(n: &[f32; 3]) -> f64 {
    n.iter().map(|&c| (c as f64) * (c as f64)).sum::<f64>().sqrt()
}

/// Rounds each component half-up to 1/32767 steps.
pub fn quantize_normal(n: [f32; 3]) -> [i16; 3] {
    n.map(|c| (c as f64 * NORMAL_ONE + 0.5).floor().clamp(-NORMAL_ONE, NORMAL_ONE) as i16)
}

/// Inverse of [`quantize_normal`] followed by renormalisation; `None` for the zero vector.
pub fn dequantize_normal(q: [i16; 3]) -> Option<[f32; 3]> {
    let v = q.map(|c| c as f64 / NORMAL_ONE);
    let len = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    (len > 0.0).then(|| v.map(|c| (c / len) as f32))
}

/// Snaps `n` to the unit vector whose quantization is a fixed point of
/// quantize∘dequantize, so tiles survive a file round trip unchanged.
///
/// Degenerate inputs (zero or non-finite) map to +z.
pub fn canonical_normal(n: [f32; 3]) -> [f32; 3] {
    canonical_quantized(n)
        .and_then(dequantize_normal)
        .unwrap_or(UP)
}

pub(crate) fn canonical_quantized(n: [f32; 3]) -> Option<[i16; 3]> {
    if n.iter().any(|c| !c.is_finite()) {
        return None;
    }
    let mut q = quantize_normal(n);
    for _ in 0..8 {
        let next = quantize_normal(dequantize_normal(q)?);
        if next == q {
            return Some(q);
        }
        q = next;
    }
    None
}

pub(crate) fn is_canonical_quantized(q: [i16; 3]) -> bool {
    dequantize_normal(q).is_some_and(|n| quantize_normal(n) == q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn void_tile_is_valid() {
        CdnTile::void(8, 4).validate().unwrap();
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let err = CdnTile::new(
            Raster::filled(2, 2, 0),
            Raster::filled(2, 3, 0),
            Raster::filled(2, 2, UP),
        );
        assert!(matches!(err, Err(SatmapError::Shape(_))));
    }

    #[test]
    fn non_unit_normal_is_rejected() {
        let err = CdnTile::new(
            Raster::filled(1, 1, 0),
            Raster::filled(1, 1, 0),
            Raster::filled(1, 1, [0.0, 0.0, 2.0]),
        );
        assert!(matches!(err, Err(SatmapError::Invariant(_))));
    }

    #[test]
    fn axis_normals_are_canonical() {
        for n in [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], UP] {
            assert_eq!(canonical_normal(n), n);
        }
        assert_eq!(canonical_normal([0.0; 3]), UP);
    }

    proptest! {
        #[test]
        fn canonical_normals_are_unit_fixed_points(x in -1.0f32..1.0, y in -1.0f32..1.0, z in -1.0f32..1.0) {
            prop_assume!(x * x + y * y + z * z > 1e-3);
            let l = (x * x + y * y + z * z).sqrt();
            let c = canonical_normal([x / l, y / l, z / l]);
            prop_assert!((norm(&c) - 1.0).abs() < 1e-6);
            prop_assert!(is_canonical_quantized(quantize_normal(c)));
            prop_assert_eq!(canonical_normal(c), c);
        }
    }
}
