use crate::satmap::ClassId;
use crate::voxelworld::{Node, VoxelWorld, BLOCK_EDGE};

/// Intervals no longer than this are treated as a graze and skipped.
pub const GRAZE_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    pub origin: [f64; 3],
    pub dir: [f64; 3],
}

impl Ray {
    /// Normalizes `dir`; `None` for a zero or non-finite direction.
    pub fn new(origin: [f64; 3], dir: [f64; 3]) -> Option<Self> {
        let len = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
        if !(len > 0.0 && len.is_finite()) || origin.iter().any(|c| !c.is_finite()) {
            return None;
        }
        Some(Self {
            origin,
            dir: dir.map(|c| c / len),
        })
    }

    pub fn at(&self, t: f64) -> [f64; 3] {
        std::array::from_fn(|i| self.origin[i] + t * self.dir[i])
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub voxel: [i64; 3],
    pub class: ClassId,
    pub t: f64,
    pub entry: [f64; 3],
    /// Outward normal of the face the ray entered through; for a ray
    /// starting inside the voxel, the face opposing the dominant direction.
    pub face_normal: [i8; 3],
}

struct Interval {
    t0: f64,
    t1: f64,
    axis: Option<usize>,
}

/// Ray interval inside the box `[lo, lo + size]`, clipped to `[t0, t1]`.
fn slab(ray: &Ray, lo: [f64; 3], size: f64, t0: f64, t1: f64) -> Option<Interval> {
    let mut near = t0;
    let mut far = t1;
    let mut axis = None;
    for i in 0..3 {
        let (o, d) = (ray.origin[i], ray.dir[i]);
        let (a, b) = (lo[i], lo[i] + size);
        if d == 0.0 {
            if o < a || o >= b {
                return None;
            }
            continue;
        }
        let (mut ta, mut tb) = ((a - o) / d, (b - o) / d);
        if ta > tb {
            std::mem::swap(&mut ta, &mut tb);
        }
        if ta > near || (axis.is_none() && ta == near) {
            near = ta;
            axis = Some(i);
        }
        far = far.min(tb);
    }
    (far - near > GRAZE_EPS).then_some(Interval {
        t0: near,
        t1: far,
        axis,
    })
}

fn descend(
    node: &Node,
    lo: [f64; 3],
    size: f64,
    ray: &Ray,
    iv: Interval,
    visit: &mut dyn FnMut(f64),
) -> Option<(Interval, [f64; 3], ClassId)> {
    visit(iv.t0);
    match node {
        Node::Empty => None,
        Node::Leaf(v) => Some((iv, lo, v.class)),
        Node::Branch(children) => {
            let half = size / 2.0;
            let mut order: Vec<(Interval, usize, [f64; 3])> = Vec::with_capacity(8);
            for (k, child) in children.iter().enumerate() {
                if child.is_empty() {
                    continue;
                }
                let clo = [
                    lo[0] + (k & 1) as f64 * half,
                    lo[1] + ((k >> 1) & 1) as f64 * half,
                    lo[2] + ((k >> 2) & 1) as f64 * half,
                ];
                if let Some(mut c) = slab(ray, clo, half, iv.t0, iv.t1) {
                    if c.axis.is_none() {
                        c.axis = iv.axis;
                    }
                    order.push((c, k, clo));
                }
            }
            order.sort_by(|a, b| a.0.t0.total_cmp(&b.0.t0).then(a.1.cmp(&b.1)));
            order
                .into_iter()
                .find_map(|(c, k, clo)| descend(&children[k], clo, half, ray, c, visit))
        }
    }
}

/// First occupied voxel along `ray` with entry `t` in `[0, t_max]`.
pub fn traverse(world: &VoxelWorld, ray: &Ray, t_max: f64) -> Option<Hit> {
    traverse_visiting(world, ray, t_max, &mut |_| {})
}

/// [`traverse`], reporting the entry `t` of every node interval entered.
/// Blocks are taken in order of entry along the ray and octree children
/// likewise, so the reported values never decrease; empty subtrees are
/// stepped over whole.
pub fn traverse_visiting(
    world: &VoxelWorld,
    ray: &Ray,
    t_max: f64,
    visit: &mut dyn FnMut(f64),
) -> Option<Hit> {
    let (x0, y0, x1, y1) = world.voxel_bounds()?;
    let edge = BLOCK_EDGE as f64;
    let span = (x1 - x0).max(y1 - y0).max(BLOCK_EDGE as i64) as f64;
    // world box as a cube large enough to hold every block
    let world_iv = slab(ray, [x0 as f64, y0 as f64, 0.0], span, 0.0, t_max)?;
    let (pa, pb) = (ray.at(world_iv.t0), ray.at(world_iv.t1));
    let bx_range = ((pa[0].min(pb[0]) / edge).floor() as i64 - 1)..=((pa[0].max(pb[0]) / edge).floor() as i64);
    let by_range = ((pa[1].min(pb[1]) / edge).floor() as i64 - 1)..=((pa[1].max(pb[1]) / edge).floor() as i64);
    let mut blocks = Vec::new();
    for by in by_range {
        for bx in bx_range.clone() {
            let Some(block) = world.block(bx as i32, by as i32) else { continue };
            if block.is_empty() {
                continue;
            }
            let lo = [bx as f64 * edge, by as f64 * edge, 0.0];
            if let Some(iv) = slab(ray, lo, edge, 0.0, t_max) {
                blocks.push((iv, block, lo));
            }
        }
    }
    blocks.sort_by(|a, b| a.0.t0.total_cmp(&b.0.t0));
    let (iv, lo, class) = blocks
        .into_iter()
        .find_map(|(iv, block, lo)| descend(block.root(), lo, edge, ray, iv, visit))?;
    let axis = iv.axis.unwrap_or_else(|| {
        (0..3)
            .max_by(|&i, &j| ray.dir[i].abs().total_cmp(&ray.dir[j].abs()))
            .unwrap()
    });
    let mut face_normal = [0i8; 3];
    face_normal[axis] = if ray.dir[axis] > 0.0 { -1 } else { 1 };
    Some(Hit {
        voxel: lo.map(|c| c as i64),
        class,
        t: iv.t0,
        entry: ray.at(iv.t0),
        face_normal,
    })
}
