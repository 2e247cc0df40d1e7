use super::mesh::{cross, norm, sub};
use super::{IngestError, LabeledMesh};
use crate::satmap::ClassId;

/// Lattice points per voxel edge.
pub const POINTS_PER_EDGE: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfacePoint {
    pub position: [f64; 3],
    pub class: ClassId,
    pub normal: [f64; 3],
}

pub type SurfacePointSet = Vec<SurfacePoint>;

/// Samples every triangle on a lattice of spacing `voxel_size / 4`.
///
/// The lattice lives in the coordinate plane the triangle faces most
/// directly, stretched so the in-plane spacing is exact, and is anchored
/// at the world origin. Coplanar neighbours therefore share lattice
/// points, and a top-left rule assigns points on a shared edge to exactly
/// one of them.
pub fn sample_surface(mesh: &LabeledMesh, voxel_size: f64) -> Result<SurfacePointSet, IngestError> {
    if !(voxel_size > 0.0 && voxel_size.is_finite()) {
        return Err(IngestError::VoxelSize(voxel_size));
    }
    let spacing = voxel_size / POINTS_PER_EDGE;
    let mut out = Vec::new();
    for tri in mesh.triangles() {
        let [a, b, c] = mesh.corners(tri);
        let n = cross(sub(b, a), sub(c, a));
        let len = norm(n);
        if len <= 1e-12 * spacing * spacing {
            continue;
        }
        let d = (0..3)
            .max_by(|&i, &j| n[i].abs().total_cmp(&n[j].abs()))
            .unwrap();
        let (u, v) = ((d + 1) % 3, (d + 2) % 3);
        let du = spacing / (1.0 + (n[u] / n[d]).powi(2)).sqrt();
        let dv = spacing / (1.0 + (n[v] / n[d]).powi(2)).sqrt();
        let mut p = [[a[u], a[v]], [b[u], b[v]], [c[u], c[v]]];
        if cross2(p[0], p[1], p[2]) < 0.0 {
            p.swap(1, 2);
        }
        let plane = n[0] * a[0] + n[1] * a[1] + n[2] * a[2];
        let lo = |axis: usize, step: f64| {
            let m = p.iter().map(|q| q[axis]).fold(f64::INFINITY, f64::min);
            (m / step - 0.5).ceil() as i64
        };
        let hi = |axis: usize, step: f64| {
            let m = p.iter().map(|q| q[axis]).fold(f64::NEG_INFINITY, f64::max);
            (m / step - 0.5).floor() as i64
        };
        for kv in lo(1, dv)..=hi(1, dv) {
            let pv = (kv as f64 + 0.5) * dv;
            for ku in lo(0, du)..=hi(0, du) {
                let pu = (ku as f64 + 0.5) * du;
                if !covers(&p, [pu, pv]) {
                    continue;
                }
                let mut position = [0.0; 3];
                position[u] = pu;
                position[v] = pv;
                position[d] = (plane - n[u] * pu - n[v] * pv) / n[d];
                out.push(SurfacePoint {
                    position,
                    class: tri.class,
                    normal: tri.normal,
                });
            }
        }
    }
    Ok(out)
}

fn cross2(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
}

/// Inside a counter-clockwise triangle, with points on an edge owned by
/// that edge only if it runs up, or runs left when horizontal.
fn covers(t: &[[f64; 2]; 3], p: [f64; 2]) -> bool {
    (0..3).all(|k| {
        let (a, b) = (t[k], t[(k + 1) % 3]);
        let e = cross2(a, b, p);
        if e != 0.0 {
            return e > 0.0;
        }
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        dy > 0.0 || (dy == 0.0 && dx < 0.0)
    })
}
