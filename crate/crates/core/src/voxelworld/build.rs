use rayon::prelude::*;

use super::{assemble_world, complete, lift_tile, Completion, VoxelError, VoxelWorld, BLOCK_EDGE};
use crate::satmap::CdnTile;

/// Caps heights at the top voxel of a block. Returns how many pixels were
/// lowered.
pub fn clamp_heights(tile: &mut CdnTile) -> usize {
    let cap = (BLOCK_EDGE - 1) as u16;
    let mut n = 0;
    for y in 0..tile.height() {
        for x in 0..tile.width() {
            let h = tile.height_m.get_mut(x, y);
            if *h > cap {
                *h = cap;
                n += 1;
            }
        }
    }
    n
}

/// Splits a tile into 64² blocks starting at block `(bx0, by0)`, lifts and
/// completes each, and assembles the world. `progress` is called once per
/// finished block, from worker threads.
pub fn build_world(
    tile: &CdnTile,
    (bx0, by0): (i32, i32),
    mode: Completion,
    progress: &(dyn Fn() + Sync),
) -> Result<VoxelWorld, VoxelError> {
    let (w, h) = (tile.width(), tile.height());
    if w == 0 || h == 0 || w % BLOCK_EDGE != 0 || h % BLOCK_EDGE != 0 {
        return Err(VoxelError::TileSize { w, h });
    }
    let (nx, ny) = (w / BLOCK_EDGE, h / BLOCK_EDGE);
    let blocks = (0..nx * ny)
        .into_par_iter()
        .map(|k| {
            let (ix, iy) = (k % nx, k / nx);
            let part = tile.crop(ix * BLOCK_EDGE, iy * BLOCK_EDGE, BLOCK_EDGE, BLOCK_EDGE);
            let surface = lift_tile(&part, bx0 + ix as i32, by0 + iy as i32)?;
            let done = complete(&surface, mode);
            progress();
            done
        })
        .collect::<Result<Vec<_>, _>>()?;
    assemble_world(blocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::satmap::{classes, Raster, UP};
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[test]
    fn builds_grid_and_reports_progress() {
        let tile = CdnTile::new(
            Raster::filled(128, 64, classes::BUILDING),
            Raster::from_fn(128, 64, |x, _| (x / 64) as u16 * 3),
            Raster::filled(128, 64, UP),
        )
        .unwrap();
        let count = AtomicUsize::new(0);
        let w = build_world(&tile, (-1, 2), Completion::Pillar, &|| {
            count.fetch_add(1, Ordering::Relaxed);
        })
        .unwrap();
        assert_eq!(count.into_inner(), 2);
        assert_eq!(w.block_extent(), Some((-1, 2, 0, 2)));
        assert_eq!(w.occupied_count(), 64 * 64 + 64 * 64 * 4);
        assert_eq!(w.column_top(0, 128), Some(3));
    }

    #[test]
    fn rejects_partial_blocks_and_clamps() {
        let t = CdnTile::void(100, 64);
        assert_eq!(
            build_world(&t, (0, 0), Completion::Pillar, &|| {}),
            Err(VoxelError::TileSize { w: 100, h: 64 })
        );
        let mut t = CdnTile::void(64, 64);
        t.height_m.set(1, 1, 64);
        t.height_m.set(2, 1, 63);
        assert_eq!(clamp_heights(&mut t), 1);
        assert_eq!(*t.height_m.get(1, 1), 63);
    }
}
