use std::collections::BTreeMap;

use super::{OctreeBlock, Voxel, VoxelError, BLOCK_EDGE};
use crate::hash::{hash_words, unit_f64};
use crate::satmap::{classes, ClassId};

/// Length of the per-corner feature vector.
pub const FEATURE_DIM: usize = 16;

const FEATURE_KEY: u64 = 0x636f_726e_6572_5f66;
const EDGE: i64 = BLOCK_EDGE as i64;

/// Completed blocks keyed by block coordinate. Immutable once assembled.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VoxelWorld {
    blocks: BTreeMap<(i32, i32), OctreeBlock>,
}

/// Places blocks at `(64·bx, 64·by)`. The block coordinates must tile a
/// rectangle with no gaps or repeats.
pub fn assemble_world(blocks: Vec<OctreeBlock>) -> Result<VoxelWorld, VoxelError> {
    let mut map = BTreeMap::new();
    for b in blocks {
        let key = (b.bx, b.by);
        if map.insert(key, b).is_some() {
            return Err(VoxelError::OverlappingBlock(key.0, key.1));
        }
    }
    if let Some((bx0, by0, bx1, by1)) = block_extent(&map) {
        for by in by0..=by1 {
            for bx in bx0..=bx1 {
                if !map.contains_key(&(bx, by)) {
                    return Err(VoxelError::MissingBlock(bx, by));
                }
            }
        }
    }
    Ok(VoxelWorld { blocks: map })
}

fn block_extent(map: &BTreeMap<(i32, i32), OctreeBlock>) -> Option<(i32, i32, i32, i32)> {
    let mut it = map.keys();
    let &(x, y) = it.next()?;
    Some(it.fold((x, y, x, y), |(a, b, c, d), &(x, y)| {
        (a.min(x), b.min(y), c.max(x), d.max(y))
    }))
}

impl VoxelWorld {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn blocks(&self) -> impl Iterator<Item = &OctreeBlock> {
        self.blocks.values()
    }

    pub fn block(&self, bx: i32, by: i32) -> Option<&OctreeBlock> {
        self.blocks.get(&(bx, by))
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    /// Inclusive block-coordinate rectangle.
    pub fn block_extent(&self) -> Option<(i32, i32, i32, i32)> {
        block_extent(&self.blocks)
    }

    /// Horizontal voxel extent `(x0, y0, x1, y1)`, end-exclusive. Height is
    /// always `[0, 64)`.
    pub fn voxel_bounds(&self) -> Option<(i64, i64, i64, i64)> {
        let (bx0, by0, bx1, by1) = self.block_extent()?;
        Some((
            bx0 as i64 * EDGE,
            by0 as i64 * EDGE,
            (bx1 as i64 + 1) * EDGE,
            (by1 as i64 + 1) * EDGE,
        ))
    }

    /// Occupancy lookup; anything outside the blocks is empty.
    pub fn get(&self, x: i64, y: i64, z: i64) -> Option<&Voxel> {
        if !(0..EDGE).contains(&z) {
            return None;
        }
        let key = (x.div_euclid(EDGE) as i32, y.div_euclid(EDGE) as i32);
        self.blocks.get(&key)?.get(
            x.rem_euclid(EDGE) as usize,
            y.rem_euclid(EDGE) as usize,
            z as usize,
        )
    }

    pub fn is_occupied(&self, x: i64, y: i64, z: i64) -> bool {
        self.get(x, y, z).is_some()
    }

    pub fn occupied_count(&self) -> usize {
        self.blocks.values().map(OctreeBlock::occupied_count).sum()
    }

    /// Occupied voxels with world coordinates.
    pub fn voxels(&self) -> Vec<([i64; 3], Voxel)> {
        let mut out = Vec::with_capacity(self.occupied_count());
        for b in self.blocks.values() {
            let (ox, oy) = (b.bx as i64 * EDGE, b.by as i64 * EDGE);
            out.extend(b.voxels().into_iter().map(|(p, v)| {
                ([ox + p[0] as i64, oy + p[1] as i64, p[2] as i64], v)
            }));
        }
        out
    }

    pub fn column_top(&self, x: i64, y: i64) -> Option<i64> {
        (0..EDGE).rev().find(|&z| self.is_occupied(x, y, z))
    }

    /// Class governing a lattice corner: the lowest class id among the up
    /// to eight voxels sharing it, or void.
    pub fn corner_class(&self, corner: [i64; 3]) -> ClassId {
        let mut best: Option<ClassId> = None;
        for k in 0..8 {
            let x = corner[0] - 1 + (k & 1);
            let y = corner[1] - 1 + ((k >> 1) & 1);
            let z = corner[2] - 1 + ((k >> 2) & 1);
            if let Some(v) = self.get(x, y, z) {
                best = Some(best.map_or(v.class, |b| b.min(v.class)));
            }
        }
        best.unwrap_or(classes::VOID)
    }

    pub fn corner_feature(&self, corner: [i64; 3]) -> [f32; FEATURE_DIM] {
        corner_embedding(self.corner_class(corner), corner)
    }

    /// Features of the eight corners of voxel `v`, indexed by
    /// `dx | dy << 1 | dz << 2`.
    pub fn voxel_corner_features(&self, v: [i64; 3]) -> [[f32; FEATURE_DIM]; 8] {
        std::array::from_fn(|k| {
            let k = k as i64;
            self.corner_feature([v[0] + (k & 1), v[1] + ((k >> 1) & 1), v[2] + ((k >> 2) & 1)])
        })
    }
}

/// Deterministic embedding of `(class, corner mod 8)` in `[-1, 1)^F`.
pub fn corner_embedding(class: ClassId, corner: [i64; 3]) -> [f32; FEATURE_DIM] {
    let m = corner.map(|c| c.rem_euclid(8) as u64);
    std::array::from_fn(|k| {
        let h = hash_words(&[FEATURE_KEY, class as u64, m[0], m[1], m[2], k as u64]);
        (2.0 * unit_f64(h) - 1.0) as f32
    })
}

/// Voxel centers, one per occupied voxel.
pub fn to_point_cloud(world: &VoxelWorld) -> Vec<[f64; 3]> {
    world
        .voxels()
        .into_iter()
        .map(|(p, _)| p.map(|c| c as f64 + 0.5))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::satmap::UP;

    fn block(bx: i32, by: i32, cells: &[[usize; 3]]) -> OctreeBlock {
        let mut b = OctreeBlock::new(bx, by);
        for &[x, y, z] in cells {
            b.set(x, y, z, Voxel { class: classes::ROAD, normal: UP });
        }
        b
    }

    #[test]
    fn single_block_world() {
        let b = block(0, 0, &[[0, 0, 0], [63, 63, 63]]);
        let w = assemble_world(vec![b.clone()]).unwrap();
        assert_eq!(w.block(0, 0), Some(&b));
        assert_eq!(w.occupied_count(), 2);
        assert!(w.is_occupied(63, 63, 63));
        assert!(!w.is_occupied(64, 0, 0));
        assert!(!w.is_occupied(0, 0, -1));
        assert!(!w.is_occupied(-1, 0, 0));
        assert_eq!(w.voxel_bounds(), Some((0, 0, 64, 64)));
    }

    #[test]
    fn negative_blocks_address_correctly() {
        let w = assemble_world(vec![block(-1, -1, &[[63, 0, 5]])]).unwrap();
        assert!(w.is_occupied(-1, -64, 5));
        assert_eq!(w.voxels()[0].0, [-1, -64, 5]);
    }

    #[test]
    fn rejects_gaps_and_repeats() {
        assert_eq!(
            assemble_world(vec![block(0, 0, &[]), block(0, 0, &[])]),
            Err(VoxelError::OverlappingBlock(0, 0))
        );
        assert_eq!(
            assemble_world(vec![block(0, 0, &[]), block(1, 1, &[])]),
            Err(VoxelError::MissingBlock(1, 0))
        );
        assert_eq!(assemble_world(vec![]).unwrap(), VoxelWorld::empty());
    }

    #[test]
    fn shared_corner_reads_same_from_both_blocks() {
        let w = assemble_world(vec![
            block(0, 0, &[[63, 10, 3]]),
            block(1, 0, &[[0, 10, 3]]),
        ])
        .unwrap();
        let left = w.voxel_corner_features([63, 10, 3]);
        let right = w.voxel_corner_features([64, 10, 3]);
        // corner dx=1 of the left voxel is corner dx=0 of the right one
        for k in [0usize, 2, 4, 6] {
            assert_eq!(left[k | 1], right[k]);
        }
        assert_eq!(w.corner_class([64, 10, 3]), classes::ROAD);
        assert_eq!(w.corner_class([200, 10, 3]), classes::VOID);
    }

    #[test]
    fn corner_class_takes_lowest_incident() {
        let mut b = OctreeBlock::new(0, 0);
        b.set(4, 4, 4, Voxel { class: classes::BUILDING, normal: UP });
        b.set(3, 3, 3, Voxel { class: classes::SIDEWALK, normal: UP });
        let w = assemble_world(vec![b]).unwrap();
        assert_eq!(w.corner_class([4, 4, 4]), classes::SIDEWALK);
        assert_eq!(w.corner_class([5, 5, 5]), classes::BUILDING);
    }

    #[test]
    fn embedding_depends_on_position_mod_eight() {
        let a = corner_embedding(classes::ROAD, [1, 2, 3]);
        assert_eq!(a, corner_embedding(classes::ROAD, [9, -6, 11]));
        assert_ne!(a, corner_embedding(classes::ROAD, [2, 2, 3]));
        assert_ne!(a, corner_embedding(classes::WATER, [1, 2, 3]));
        assert!(a.iter().all(|v| (-1.0..1.0).contains(v)));
    }

    #[test]
    fn point_cloud_centers() {
        assert!(to_point_cloud(&VoxelWorld::empty()).is_empty());
        let w = assemble_world(vec![block(0, 0, &[[0, 0, 0]])]).unwrap();
        assert_eq!(to_point_cloud(&w), vec![[0.5, 0.5, 0.5]]);
    }
}
