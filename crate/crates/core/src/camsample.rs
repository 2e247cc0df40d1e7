//! Walkable masks and ground-level camera sampling.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::satmap::{CdnTile, Palette, Raster};
use crate::voxelworld::VoxelWorld;

pub const EROSION_STEPS: usize = 3;
pub const DEFAULT_MIN_COMPONENT_PX: usize = 400;
pub const DEFAULT_EYE_HEIGHT_M: f64 = 1.7;
pub const MAX_PITCH_DEG: f64 = 45.0;
pub const MAX_ATTEMPTS: usize = 1000;

#[derive(Debug, Error, PartialEq)]
pub enum CameraError {
    #[error("walkable mask has no pixels")]
    EmptyMask,
    #[error("no collision-free pose after {0} attempts")]
    Exhausted(usize),
}

/// Walkable pixels of a tile whose pixel `(0, 0)` sits at world
/// `(origin_x, origin_y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkableMask {
    pub origin: (i64, i64),
    pub mask: Raster<bool>,
    /// Morphology applied so far, oldest first.
    pub steps: Vec<String>,
}

impl WalkableMask {
    pub fn count(&self) -> usize {
        self.mask.as_slice().iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    /// `true` pixels as world coordinates, row-major.
    pub fn pixels(&self) -> Vec<(i64, i64)> {
        let mut out = Vec::new();
        for y in 0..self.mask.height() {
            for x in 0..self.mask.width() {
                if *self.mask.get(x, y) {
                    out.push((self.origin.0 + x as i64, self.origin.1 + y as i64));
                }
            }
        }
        out
    }

    pub fn contains(&self, x: i64, y: i64) -> bool {
        let (lx, ly) = (x - self.origin.0, y - self.origin.1);
        lx >= 0
            && ly >= 0
            && (lx as usize) < self.mask.width()
            && (ly as usize) < self.mask.height()
            && *self.mask.get(lx as usize, ly as usize)
    }
}

/// Walkable class at ground level.
pub fn label_walkable(tile: &CdnTile, palette: &Palette, origin: (i64, i64)) -> WalkableMask {
    let mask = Raster::from_fn(tile.width(), tile.height(), |x, y| {
        palette.is_walkable(*tile.category.get(x, y)) && *tile.height_m.get(x, y) == 0
    });
    WalkableMask {
        origin,
        mask,
        steps: vec!["label walkable at ground level".into()],
    }
}

/// One step of binary erosion with the 4-neighbour cross. Pixels beyond
/// the raster count as false.
pub fn erode4(mask: &Raster<bool>) -> Raster<bool> {
    let (w, h) = (mask.width(), mask.height());
    Raster::from_fn(w, h, |x, y| {
        *mask.get(x, y)
            && x > 0
            && y > 0
            && x + 1 < w
            && y + 1 < h
            && *mask.get(x - 1, y)
            && *mask.get(x + 1, y)
            && *mask.get(x, y - 1)
            && *mask.get(x, y + 1)
    })
}

/// Drops 4-connected components smaller than `min_px`.
pub fn remove_small_components(mask: &Raster<bool>, min_px: usize) -> Raster<bool> {
    let (w, h) = (mask.width(), mask.height());
    let mut out = mask.clone();
    let mut seen = Raster::filled(w, h, false);
    for sy in 0..h {
        for sx in 0..w {
            if !*mask.get(sx, sy) || *seen.get(sx, sy) {
                continue;
            }
            let mut comp = Vec::new();
            let mut queue = VecDeque::from([(sx, sy)]);
            seen.set(sx, sy, true);
            while let Some((x, y)) = queue.pop_front() {
                comp.push((x, y));
                let nbrs = [
                    (x.wrapping_sub(1), y),
                    (x + 1, y),
                    (x, y.wrapping_sub(1)),
                    (x, y + 1),
                ];
                for (nx, ny) in nbrs {
                    if nx < w && ny < h && *mask.get(nx, ny) && !*seen.get(nx, ny) {
                        seen.set(nx, ny, true);
                        queue.push_back((nx, ny));
                    }
                }
            }
            if comp.len() < min_px {
                for (x, y) in comp {
                    out.set(x, y, false);
                }
            }
        }
    }
    out
}

/// Three erosions, then removal of components under `min_component_px`.
pub fn refine_mask(mask: &WalkableMask, min_component_px: usize) -> WalkableMask {
    let mut m = mask.mask.clone();
    for _ in 0..EROSION_STEPS {
        m = erode4(&m);
    }
    let m = remove_small_components(&m, min_component_px);
    let mut steps = mask.steps.clone();
    steps.push(format!("erode 4-neighbour x{EROSION_STEPS}"));
    steps.push(format!("drop 4-connected components under {min_component_px} px"));
    WalkableMask {
        origin: mask.origin,
        mask: m,
        steps,
    }
}

/// Degrees. Positive pitch looks down.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub position: [f64; 3],
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

/// Seeded rejection sampler over a mask.
pub struct CameraSampler {
    rng: ChaCha8Rng,
    pub eye_height_m: f64,
    pub max_attempts: usize,
}

impl CameraSampler {
    pub fn new(seed: u64, eye_height_m: f64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            eye_height_m,
            max_attempts: MAX_ATTEMPTS,
        }
    }

    pub fn sample(&mut self, mask: &WalkableMask, world: &VoxelWorld) -> Result<CameraPose, CameraError> {
        let pixels = mask.pixels();
        if pixels.is_empty() {
            return Err(CameraError::EmptyMask);
        }
        for _ in 0..self.max_attempts {
            let (px, py) = pixels[self.rng.random_range(0..pixels.len())];
            let x = px as f64 + self.rng.random::<f64>();
            let y = py as f64 + self.rng.random::<f64>();
            let yaw = self.rng.random_range(0.0..360.0);
            let pitch = self.rng.random_range(0.0..=MAX_PITCH_DEG);
            let roll = self.rng.random_range(0.0..360.0);
            let ground = ground_top(world, px, py);
            let z = ground + self.eye_height_m;
            let cz = z.floor() as i64;
            if world.is_occupied(px, py, cz) || world.is_occupied(px, py, cz + 1) {
                continue;
            }
            return Ok(CameraPose {
                position: [x, y, z],
                yaw,
                pitch,
                roll,
            });
        }
        Err(CameraError::Exhausted(self.max_attempts))
    }
}

/// Top face of the ground run: the lowest empty z of the column.
pub fn ground_top(world: &VoxelWorld, x: i64, y: i64) -> f64 {
    (0..).find(|&z| !world.is_occupied(x, y, z)).unwrap() as f64
}

pub fn sample_camera(
    mask: &WalkableMask,
    world: &VoxelWorld,
    seed: u64,
    eye_height_m: f64,
) -> Result<CameraPose, CameraError> {
    CameraSampler::new(seed, eye_height_m).sample(mask, world)
}
