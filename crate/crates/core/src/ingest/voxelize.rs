use std::collections::BTreeMap;

use super::SurfacePoint;
use crate::satmap::{classes, ClassId, UP};
use crate::voxelworld::{OctreeBlock, Voxel, BLOCK_EDGE};

const EDGE: i64 = BLOCK_EDGE as i64;

#[derive(Default)]
struct Bin {
    votes: [u32; classes::COUNT],
    normals: Vec<[f64; 3]>,
}

impl Bin {
    fn into_voxel(mut self) -> Voxel {
        let class = (0..classes::COUNT)
            .max_by(|&a, &b| self.votes[a].cmp(&self.votes[b]).then(b.cmp(&a)))
            .unwrap() as ClassId;
        // fixed summation order keeps the mean independent of input order
        self.normals.sort_by(|a, b| {
            a[0].total_cmp(&b[0])
                .then(a[1].total_cmp(&b[1]))
                .then(a[2].total_cmp(&b[2]))
        });
        let s = self.normals.iter().fold([0.0; 3], |s, n| [s[0] + n[0], s[1] + n[1], s[2] + n[2]]);
        let len = (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt();
        let normal = if len > 1e-9 * self.normals.len() as f64 {
            s.map(|c| (c / len) as f32)
        } else {
            UP
        };
        Voxel { class, normal }
    }
}

fn voxel_of(p: &SurfacePoint) -> Option<[i64; 3]> {
    let v = p.position.map(|c| c.floor());
    if v.iter().any(|c| !c.is_finite()) || v[2] < 0.0 || v[2] >= EDGE as f64 {
        return None;
    }
    Some(v.map(|c| c as i64))
}

/// Bins points into block `(bx, by)` at 1 m voxels: majority class (ties
/// to the lowest id) and the normalized mean normal (+z when it cancels).
/// Points outside the block are ignored.
pub fn voxelize(points: &[SurfacePoint], bx: i32, by: i32) -> OctreeBlock {
    let (ox, oy) = (bx as i64 * EDGE, by as i64 * EDGE);
    let mut bins: BTreeMap<[usize; 3], Bin> = BTreeMap::new();
    for p in points {
        let Some([x, y, z]) = voxel_of(p) else { continue };
        let (lx, ly) = (x - ox, y - oy);
        if !(0..EDGE).contains(&lx) || !(0..EDGE).contains(&ly) {
            continue;
        }
        let bin = bins.entry([lx as usize, ly as usize, z as usize]).or_default();
        bin.votes[p.class as usize] += 1;
        bin.normals.push(p.normal);
    }
    let mut block = OctreeBlock::new(bx, by);
    for ([x, y, z], bin) in bins {
        block.set(x, y, z, bin.into_voxel());
    }
    block
}

/// Voxelizes every block touched by the points, sorted by `(by, bx)`.
pub fn voxelize_all(points: &[SurfacePoint]) -> Vec<OctreeBlock> {
    let mut keys: Vec<(i32, i32)> = points
        .iter()
        .filter_map(voxel_of)
        .map(|[x, y, _]| (y.div_euclid(EDGE) as i32, x.div_euclid(EDGE) as i32))
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys.into_iter().map(|(by, bx)| voxelize(points, bx, by)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(position: [f64; 3], class: ClassId, normal: [f64; 3]) -> SurfacePoint {
        SurfacePoint { position, class, normal }
    }

    #[test]
    fn majority_class_wins() {
        let z = [0.0, 0.0, 1.0];
        let pts = [
            pt([0.1, 0.1, 0.1], classes::ROAD, z),
            pt([0.5, 0.5, 0.5], classes::ROAD, z),
            pt([0.9, 0.2, 0.3], classes::TREE, z),
        ];
        let b = voxelize(&pts, 0, 0);
        assert_eq!(b.occupied_count(), 1);
        assert_eq!(b.get(0, 0, 0).unwrap().class, classes::ROAD);
    }

    #[test]
    fn tie_goes_to_lowest_class() {
        let z = [0.0, 0.0, 1.0];
        let pts = [pt([0.5; 3], classes::TREE, z), pt([0.5; 3], classes::SIDEWALK, z)];
        assert_eq!(voxelize(&pts, 0, 0).get(0, 0, 0).unwrap().class, classes::SIDEWALK);
    }

    #[test]
    fn normals_average_and_fall_back() {
        let pts = [
            pt([0.5; 3], 1, [1.0, 0.0, 0.0]),
            pt([0.5; 3], 1, [0.0, 1.0, 0.0]),
            pt([1.5, 0.5, 0.5], 1, [0.0, 0.0, 1.0]),
            pt([1.5, 0.5, 0.5], 1, [0.0, 0.0, -1.0]),
        ];
        let b = voxelize(&pts, 0, 0);
        let h = std::f32::consts::FRAC_1_SQRT_2;
        let n = b.get(0, 0, 0).unwrap().normal;
        assert!((n[0] - h).abs() < 1e-7 && (n[1] - h).abs() < 1e-7 && n[2] == 0.0);
        assert_eq!(b.get(1, 0, 0).unwrap().normal, UP);
    }

    #[test]
    fn points_outside_block_are_ignored() {
        let z = [0.0, 0.0, 1.0];
        let pts = [
            pt([64.5, 0.5, 0.5], 1, z),
            pt([-0.5, 0.5, 0.5], 1, z),
            pt([0.5, 0.5, 64.5], 1, z),
            pt([0.5, 0.5, -0.5], 1, z),
        ];
        assert!(voxelize(&pts, 0, 0).is_empty());
        let all = voxelize_all(&pts);
        assert_eq!(all.iter().map(|b| (b.bx, b.by)).collect::<Vec<_>>(), vec![(-1, 0), (1, 0)]);
        assert_eq!(all[0].get(63, 0, 0).unwrap().class, 1);
    }

    proptest! {
        #[test]
        fn order_does_not_matter(
            raw in proptest::collection::vec(
                ((0.0f64..4.0, 0.0f64..4.0, 0.0f64..4.0), 0u8..12, (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)),
                1..80,
            ),
            seed in any::<u64>(),
        ) {
            let pts: Vec<_> = raw
                .into_iter()
                .map(|((x, y, z), c, (a, b, d))| pt([x, y, z], c, [a, b, d]))
                .collect();
            let mut shuffled = pts.clone();
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(voxelize(&pts, 0, 0), voxelize(&shuffled, 0, 0));
        }
    }
}
