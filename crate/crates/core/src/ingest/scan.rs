use crate::satmap::{classes, CdnTile, Raster, UP};
use crate::voxelworld::{OctreeBlock, BLOCK_EDGE};

/// First hit looking down each column: class, z index and normal. Empty
/// columns become void at height 0 facing up.
pub fn topdown_scan(block: &OctreeBlock) -> CdnTile {
    let mut category = Raster::filled(BLOCK_EDGE, BLOCK_EDGE, classes::VOID);
    let mut height = Raster::filled(BLOCK_EDGE, BLOCK_EDGE, 0u16);
    let mut normal = Raster::filled(BLOCK_EDGE, BLOCK_EDGE, UP);
    for y in 0..BLOCK_EDGE {
        for x in 0..BLOCK_EDGE {
            let Some(z) = block.column_top(x, y) else { continue };
            let v = block.get(x, y, z).unwrap();
            category.set(x, y, v.class);
            height.set(x, y, z as u16);
            normal.set(x, y, unit(v.normal));
        }
    }
    CdnTile {
        category,
        height_m: height,
        normal,
    }
}

fn unit(n: [f32; 3]) -> [f32; 3] {
    let len = (n[0] as f64).hypot(n[1] as f64).hypot(n[2] as f64);
    if (len - 1.0).abs() <= 1e-6 {
        n
    } else if len > 1e-9 && len.is_finite() {
        n.map(|c| (c as f64 / len) as f32)
    } else {
        UP
    }
}
