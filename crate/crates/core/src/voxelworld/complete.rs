use std::collections::VecDeque;
use std::str::FromStr;

use super::{OctreeBlock, Voxel, VoxelError, VoxelWorld, BLOCK_EDGE};
use crate::satmap::{classes, UP};

/// Canopy depth for tree columns under watertight completion.
pub const CANOPY_THICKNESS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Completion {
    Pillar,
    Watertight,
}

impl FromStr for Completion {
    type Err = VoxelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pillar" => Ok(Completion::Pillar),
            "watertight" => Ok(Completion::Watertight),
            _ => Err(VoxelError::UnknownCompletion(s.to_string())),
        }
    }
}

impl std::fmt::Display for Completion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Completion::Pillar => "pillar",
            Completion::Watertight => "watertight",
        })
    }
}

pub fn complete(surface: &OctreeBlock, mode: Completion) -> Result<OctreeBlock, VoxelError> {
    match mode {
        Completion::Pillar => complete_pillar(surface),
        Completion::Watertight => complete_watertight(surface),
    }
}

fn surface_columns(surface: &OctreeBlock) -> Result<Vec<([usize; 3], Voxel)>, VoxelError> {
    let mut seen = vec![false; BLOCK_EDGE * BLOCK_EDGE];
    let voxels = surface.voxels();
    for (p, _) in &voxels {
        let k = p[1] * BLOCK_EDGE + p[0];
        if seen[k] {
            return Err(VoxelError::NotSurface { x: p[0], y: p[1] });
        }
        seen[k] = true;
    }
    Ok(voxels)
}

/// Extends every surface voxel down to z = 0 with its own class.
pub fn complete_pillar(surface: &OctreeBlock) -> Result<OctreeBlock, VoxelError> {
    let mut out = OctreeBlock::new(surface.bx, surface.by);
    for ([x, y, h], v) in surface_columns(surface)? {
        for z in 0..h {
            out.set(
                x,
                y,
                z,
                Voxel {
                    class: v.class,
                    normal: UP,
                },
            );
        }
        out.set(x, y, h, v);
    }
    Ok(out)
}

/// Pillar completion, except tree columns keep a canopy of
/// [`CANOPY_THICKNESS`] voxels above a trunk-class stem.
pub fn complete_watertight(surface: &OctreeBlock) -> Result<OctreeBlock, VoxelError> {
    let mut out = OctreeBlock::new(surface.bx, surface.by);
    for ([x, y, h], v) in surface_columns(surface)? {
        let canopy_floor = (h + 1).saturating_sub(CANOPY_THICKNESS);
        for z in 0..h {
            let class = if v.class == classes::TREE && z < canopy_floor {
                classes::TRUNK
            } else {
                v.class
            };
            out.set(x, y, z, Voxel { class, normal: UP });
        }
        out.set(x, y, h, v);
    }
    Ok(out)
}

/// Cells strictly below a column's top voxel that a 6-connected flood
/// from outside the world box can reach. Zero means watertight.
pub fn watertight_violations(world: &VoxelWorld) -> usize {
    let Some((x0, y0, x1, y1)) = world.voxel_bounds() else {
        return 0;
    };
    // one cell of padding on every side
    let w = (x1 - x0 + 2) as usize;
    let h = (y1 - y0 + 2) as usize;
    let d = BLOCK_EDGE + 2;
    let idx = |x: usize, y: usize, z: usize| (z * h + y) * w + x;
    let mut solid = vec![false; w * h * d];
    let mut top = vec![-1i64; w * h];
    for ([wx, wy, wz], _) in world.voxels() {
        let (x, y, z) = ((wx - x0 + 1) as usize, (wy - y0 + 1) as usize, wz as usize + 1);
        solid[idx(x, y, z)] = true;
        let t = &mut top[y * w + x];
        *t = (*t).max(z as i64);
    }
    let mut seen = vec![false; w * h * d];
    let mut queue = VecDeque::from([(0usize, 0usize, 0usize)]);
    seen[idx(0, 0, 0)] = true;
    let mut violations = 0;
    while let Some((x, y, z)) = queue.pop_front() {
        if z > 0 && (z as i64) < top[y * w + x] {
            violations += 1;
        }
        let mut push = |nx: usize, ny: usize, nz: usize| {
            let k = idx(nx, ny, nz);
            if !seen[k] && !solid[k] {
                seen[k] = true;
                queue.push_back((nx, ny, nz));
            }
        };
        if x > 0 {
            push(x - 1, y, z);
        }
        if x + 1 < w {
            push(x + 1, y, z);
        }
        if y > 0 {
            push(x, y - 1, z);
        }
        if y + 1 < h {
            push(x, y + 1, z);
        }
        if z > 0 {
            push(x, y, z - 1);
        }
        if z + 1 < d {
            push(x, y, z + 1);
        }
    }
    violations
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voxelworld::assemble_world;
    use proptest::prelude::*;

    fn surface(cols: &[(usize, usize, usize, u8)]) -> OctreeBlock {
        let mut b = OctreeBlock::new(0, 0);
        for &(x, y, z, class) in cols {
            b.set(x, y, z, Voxel { class, normal: [0.0, 0.6, 0.8] });
        }
        b
    }

    fn column(b: &OctreeBlock, x: usize, y: usize) -> Vec<Option<u8>> {
        (0..BLOCK_EDGE).map(|z| b.get(x, y, z).map(|v| v.class)).collect()
    }

    #[test]
    fn ground_voxel_is_unchanged() {
        let s = surface(&[(4, 4, 0, classes::ROAD)]);
        assert_eq!(complete_pillar(&s).unwrap(), s);
        assert_eq!(complete_watertight(&s).unwrap(), s);
    }

    #[test]
    fn tower_becomes_eleven_voxels() {
        let s = surface(&[(1, 2, 10, classes::BUILDING)]);
        let p = complete_pillar(&s).unwrap();
        assert_eq!(p.occupied_count(), 11);
        let col = column(&p, 1, 2);
        assert!(col[..=10].iter().all(|c| *c == Some(classes::BUILDING)));
        assert!(col[11..].iter().all(Option::is_none));
        assert_eq!(p.get(1, 2, 3).unwrap().normal, UP);
        assert_eq!(p.get(1, 2, 10).unwrap().normal, [0.0, 0.6, 0.8]);
    }

    #[test]
    fn pillar_tree_is_all_tree() {
        let p = complete_pillar(&surface(&[(0, 0, 8, classes::TREE)])).unwrap();
        assert_eq!(p.occupied_count(), 9);
        assert!(p.voxels().iter().all(|(_, v)| v.class == classes::TREE));
    }

    #[test]
    fn watertight_tree_has_canopy_and_trunk() {
        let w = complete_watertight(&surface(&[(0, 0, 8, classes::TREE)])).unwrap();
        let col = column(&w, 0, 0);
        for z in 0..=5 {
            assert_eq!(col[z], Some(classes::TRUNK), "z={z}");
        }
        for z in 6..=8 {
            assert_eq!(col[z], Some(classes::TREE), "z={z}");
        }
        assert!(col[9..].iter().all(Option::is_none));
    }

    #[test]
    fn short_tree_is_all_canopy() {
        let w = complete_watertight(&surface(&[(0, 0, 1, classes::TREE)])).unwrap();
        assert_eq!(column(&w, 0, 0)[..2], [Some(classes::TREE), Some(classes::TREE)]);
    }

    #[test]
    fn roof_column_is_full() {
        let w = complete_watertight(&surface(&[(9, 9, 20, classes::BUILDING)])).unwrap();
        assert_eq!(w.occupied_count(), 21);
        let world = assemble_world(vec![w]).unwrap();
        assert_eq!(watertight_violations(&world), 0);
    }

    #[test]
    fn rejects_stacked_surface() {
        let s = surface(&[(3, 3, 0, classes::ROAD), (3, 3, 5, classes::ROAD)]);
        assert_eq!(complete_pillar(&s), Err(VoxelError::NotSurface { x: 3, y: 3 }));
    }

    #[test]
    fn bare_surface_shell_leaks() {
        let s = surface(&[(5, 5, 12, classes::BUILDING)]);
        let world = assemble_world(vec![s]).unwrap();
        assert_eq!(watertight_violations(&world), 12);
    }

    #[test]
    fn completion_names_parse() {
        assert_eq!("pillar".parse::<Completion>().unwrap(), Completion::Pillar);
        assert_eq!("watertight".parse::<Completion>().unwrap(), Completion::Watertight);
        assert!("ounet".parse::<Completion>().is_err());
    }

    fn arb_surface() -> impl Strategy<Value = OctreeBlock> {
        proptest::collection::vec((0usize..16, 0usize..16, 0usize..64, 1u8..11), 0..120).prop_map(
            |cols| {
                let mut b = OctreeBlock::new(0, 0);
                for (x, y, z, class) in cols {
                    if b.column_top(x, y).is_none() {
                        b.set(x, y, z, Voxel { class, normal: UP });
                    }
                }
                b
            },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn completion_keeps_surface_and_seals(s in arb_surface()) {
            for mode in [Completion::Pillar, Completion::Watertight] {
                let c = complete(&s, mode).unwrap();
                prop_assert!(c.is_canonical());
                for (p, v) in s.voxels() {
                    prop_assert_eq!(c.get(p[0], p[1], p[2]), Some(&v));
                    let run = (0..BLOCK_EDGE).filter(|&z| c.get(p[0], p[1], z).is_some()).count();
                    prop_assert_eq!(run, p[2] + 1);
                }
                let world = assemble_world(vec![c]).unwrap();
                prop_assert_eq!(watertight_violations(&world), 0);
            }
        }
    }
}
