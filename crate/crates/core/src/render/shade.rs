use rayon::prelude::*;

use super::{traverse, Camera, Intrinsics, Ray, RenderError};
use crate::camsample::CameraPose;
use crate::hash::{hash_words, unit_f64};
use crate::satmap::{classes, ClassId, Palette};
use crate::voxelworld::{VoxelWorld, FEATURE_DIM};

pub const DEPTH_MAGIC: &[u8; 4] = b"IDEP";

/// Blend weights of the eight corners, indexed `dx | dy << 1 | dz << 2`,
/// for fractional position `f` in the unit cube.
pub fn trilinear_weights(f: [f64; 3]) -> [f64; 8] {
    std::array::from_fn(|k| {
        (0..3)
            .map(|a| if (k >> a) & 1 == 1 { f[a] } else { 1.0 - f[a] })
            .product()
    })
}

/// Corner features of `voxel` blended at `point`, which is clamped into
/// the voxel's closed cube.
pub fn trilinear_features_at(world: &VoxelWorld, voxel: [i64; 3], point: [f64; 3]) -> [f64; FEATURE_DIM] {
    let f = std::array::from_fn(|i| (point[i] - voxel[i] as f64).clamp(0.0, 1.0));
    let w = trilinear_weights(f);
    let corners = world.voxel_corner_features(voxel);
    let mut out = [0.0; FEATURE_DIM];
    for (wk, ck) in w.iter().zip(&corners) {
        for (o, c) in out.iter_mut().zip(ck) {
            *o += wk * *c as f64;
        }
    }
    out
}

/// Features at a point strictly inside an occupied voxel.
pub fn trilinear_features(world: &VoxelWorld, point: [f64; 3]) -> Result<[f64; FEATURE_DIM], RenderError> {
    let voxel = point.map(|c| c.floor() as i64);
    let strictly_inside = (0..3).all(|i| point[i] > voxel[i] as f64);
    if !strictly_inside || !world.is_occupied(voxel[0], voxel[1], voxel[2]) {
        return Err(RenderError::EmptySpace(point));
    }
    Ok(trilinear_features_at(world, voxel, point))
}

/// Palette plus a light preset; sharing a style shares the look.
#[derive(Clone, Debug, PartialEq)]
pub struct Style {
    pub palette: Palette,
    /// Unit vector toward the light.
    pub light: [f64; 3],
    pub ambient: f64,
    pub texture_amp: f64,
    pub max_distance: f64,
}

impl Default for Style {
    fn default() -> Self {
        let l: [f64; 3] = [0.35, 0.25, 0.9];
        let n = (l[0] * l[0] + l[1] * l[1] + l[2] * l[2]).sqrt();
        Self {
            palette: Palette::default_city(),
            light: l.map(|c| c / n),
            ambient: 0.35,
            texture_amp: 0.06,
            max_distance: 4096.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PixelSample {
    pub class: ClassId,
    pub depth: f64,
    pub rgb: [f32; 3],
    pub feature: [f32; FEATURE_DIM],
}

pub fn shade_ray(world: &VoxelWorld, ray: &Ray, style: &Style) -> PixelSample {
    let Some(hit) = traverse(world, ray, style.max_distance) else {
        let sky = style.palette.color(classes::SKY).unwrap_or([0.6, 0.8, 1.0]);
        return PixelSample {
            class: classes::SKY,
            depth: f64::INFINITY,
            rgb: sky.map(|c| c as f32),
            feature: [0.0; FEATURE_DIM],
        };
    };
    let feature = trilinear_features_at(world, hit.voxel, hit.entry);
    let n = hit.face_normal.map(f64::from);
    let lambert = (n[0] * style.light[0] + n[1] * style.light[1] + n[2] * style.light[2]).max(0.0);
    let light = style.ambient + (1.0 - style.ambient) * lambert;
    let key: Vec<u64> = feature.iter().map(|f| (f * 256.0).round() as i64 as u64).collect();
    let grain = style.texture_amp * (2.0 * unit_f64(hash_words(&key)) - 1.0);
    let base = style.palette.color(hit.class).unwrap_or([0.5; 3]);
    PixelSample {
        class: hit.class,
        depth: hit.t,
        rgb: base.map(|c| (c * light + grain).clamp(0.0, 1.0) as f32),
        feature: feature.map(|f| f as f32),
    }
}

/// Row-major planes of equal size.
#[derive(Clone, Debug, PartialEq)]
pub struct RenderOutput {
    pub width: u32,
    pub height: u32,
    pub semantic: Vec<ClassId>,
    /// Distance along the ray, infinite on a miss.
    pub depth: Vec<f32>,
    pub shaded: Vec<[f32; 3]>,
    pub features: Vec<[f32; FEATURE_DIM]>,
}

impl RenderOutput {
    pub fn shaded_rgb8(&self) -> Vec<u8> {
        self.shaded
            .iter()
            .flat_map(|p| p.map(|c| (c * 255.0).round() as u8))
            .collect()
    }
}

pub fn render_view(
    world: &VoxelWorld,
    pose: &CameraPose,
    intr: Intrinsics,
    style: &Style,
) -> Result<RenderOutput, RenderError> {
    let cam = Camera::new(pose, intr)?;
    let (w, h) = (intr.width as usize, intr.height as usize);
    let samples: Vec<PixelSample> = (0..w * h)
        .into_par_iter()
        .map(|k| {
            let (x, y) = (k % w, k / w);
            shade_ray(world, &cam.ray(x as f64 + 0.5, y as f64 + 0.5), style)
        })
        .collect();
    Ok(RenderOutput {
        width: intr.width,
        height: intr.height,
        semantic: samples.iter().map(|s| s.class).collect(),
        depth: samples.iter().map(|s| s.depth as f32).collect(),
        shaded: samples.iter().map(|s| s.rgb).collect(),
        features: samples.iter().map(|s| s.feature).collect(),
    })
}

/// `IDEP`, width and height as u32, then f32 depths, all little-endian.
pub fn depth_to_bytes(out: &RenderOutput) -> Vec<u8> {
    let mut b = Vec::with_capacity(12 + out.depth.len() * 4);
    b.extend_from_slice(DEPTH_MAGIC);
    b.extend_from_slice(&out.width.to_le_bytes());
    b.extend_from_slice(&out.height.to_le_bytes());
    for d in &out.depth {
        b.extend_from_slice(&d.to_le_bytes());
    }
    b
}

pub fn depth_from_bytes(bytes: &[u8]) -> Result<(u32, u32, Vec<f32>), RenderError> {
    let bad = |m: &str| RenderError::DepthFormat(m.to_string());
    if bytes.len() < 12 || &bytes[..4] != DEPTH_MAGIC {
        return Err(bad("missing header"));
    }
    let w = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let h = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    let body = &bytes[12..];
    if body.len() as u64 != w as u64 * h as u64 * 4 {
        return Err(bad("body length does not match size"));
    }
    Ok((
        w,
        h,
        body.chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    ))
}
