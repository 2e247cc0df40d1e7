use super::{OctreeBlock, Voxel, VoxelError, BLOCK_EDGE};
use crate::satmap::{classes, CdnTile};

/// Places one surface voxel per non-void pixel at `(x, y, height)`.
pub fn lift_tile(tile: &CdnTile, bx: i32, by: i32) -> Result<OctreeBlock, VoxelError> {
    if tile.width() != BLOCK_EDGE || tile.height() != BLOCK_EDGE {
        return Err(VoxelError::TileSize {
            w: tile.width(),
            h: tile.height(),
        });
    }
    let mut block = OctreeBlock::new(bx, by);
    for y in 0..BLOCK_EDGE {
        for x in 0..BLOCK_EDGE {
            let class = *tile.category.get(x, y);
            if class == classes::VOID {
                continue;
            }
            let h = *tile.height_m.get(x, y);
            if h as usize >= BLOCK_EDGE {
                return Err(VoxelError::HeightOutOfRange { x, y, h });
            }
            block.set(
                x,
                y,
                h as usize,
                Voxel {
                    class,
                    normal: *tile.normal.get(x, y),
                },
            );
        }
    }
    Ok(block)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::satmap::{Raster, UP};

    fn flat(class: u8, h: u16) -> CdnTile {
        CdnTile::new(
            Raster::filled(64, 64, class),
            Raster::filled(64, 64, h),
            Raster::filled(64, 64, UP),
        )
        .unwrap()
    }

    #[test]
    fn void_tile_lifts_to_empty_block() {
        let b = lift_tile(&CdnTile::void(64, 64), 0, 0).unwrap();
        assert!(b.is_empty());
        assert!(b.root().is_empty());
    }

    #[test]
    fn flat_road_fills_ground_layer() {
        let b = lift_tile(&flat(classes::ROAD, 0), 2, -1).unwrap();
        assert_eq!(b.occupied_count(), 64 * 64);
        assert_eq!((b.bx, b.by), (2, -1));
        for (p, v) in b.voxels() {
            assert_eq!(p[2], 0);
            assert_eq!(v.class, classes::ROAD);
        }
    }

    #[test]
    fn rejects_tall_and_misshapen_tiles() {
        let mut t = flat(classes::BUILDING, 10);
        t.height_m.set(3, 4, 64);
        assert_eq!(
            lift_tile(&t, 0, 0),
            Err(VoxelError::HeightOutOfRange { x: 3, y: 4, h: 64 })
        );
        assert_eq!(
            lift_tile(&CdnTile::void(32, 64), 0, 0),
            Err(VoxelError::TileSize { w: 32, h: 64 })
        );
    }
}
