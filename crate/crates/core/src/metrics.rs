//! Occupancy statistics over voxel worlds and a distance between them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::satmap::classes;
use crate::voxelworld::{VoxelWorld, BLOCK_EDGE};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("histogram layouts differ: {0}")]
    BinMismatch(&'static str),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupancyStats {
    pub occupied: u64,
    /// Voxels per class id.
    pub class_histogram: Vec<u64>,
    /// Voxels per z level.
    pub height_histogram: Vec<u64>,
    /// Exposed faces over `6 * occupied`.
    pub surface_to_volume: f64,
    /// Share of non-empty columns holding a single contiguous run.
    pub column_contiguity: f64,
}

/// Exact statistics by enumerating every occupied voxel. A face counts as
/// exposed when the neighbouring cell is empty, including below z = 0.
pub fn world_stats(world: &VoxelWorld) -> OccupancyStats {
    let mut class_histogram = vec![0u64; classes::COUNT];
    let mut height_histogram = vec![0u64; BLOCK_EDGE];
    let mut voxels = world.voxels();
    let mut exposed = 0u64;
    for ([x, y, z], v) in &voxels {
        class_histogram[v.class as usize] += 1;
        height_histogram[*z as usize] += 1;
        let nbrs = [
            [x - 1, *y, *z],
            [x + 1, *y, *z],
            [*x, y - 1, *z],
            [*x, y + 1, *z],
            [*x, *y, z - 1],
            [*x, *y, z + 1],
        ];
        exposed += nbrs.iter().filter(|n| !world.is_occupied(n[0], n[1], n[2])).count() as u64;
    }
    voxels.sort_unstable_by_key(|(p, _)| *p);
    let (mut columns, mut contiguous) = (0u64, 0u64);
    for col in voxels.chunk_by(|a, b| a.0[..2] == b.0[..2]) {
        columns += 1;
        if col.windows(2).all(|w| w[1].0[2] == w[0].0[2] + 1) {
            contiguous += 1;
        }
    }
    let occupied = voxels.len() as u64;
    OccupancyStats {
        occupied,
        class_histogram,
        height_histogram,
        surface_to_volume: if occupied == 0 { 0.0 } else { exposed as f64 / (6 * occupied) as f64 },
        column_contiguity: if columns == 0 { 0.0 } else { contiguous as f64 / columns as f64 },
    }
}

fn normalized_l1(a: &[u64], ta: u64, b: &[u64], tb: u64) -> f64 {
    let norm = |c: u64, t: u64| if t == 0 { 0.0 } else { c as f64 / t as f64 };
    a.iter().zip(b).map(|(&x, &y)| (norm(x, ta) - norm(y, tb)).abs()).sum()
}

/// L1 between normalized histograms plus absolute differences of the two
/// ratios.
pub fn stats_distance(a: &OccupancyStats, b: &OccupancyStats) -> Result<f64, MetricsError> {
    if a.class_histogram.len() != b.class_histogram.len() {
        return Err(MetricsError::BinMismatch("class histogram"));
    }
    if a.height_histogram.len() != b.height_histogram.len() {
        return Err(MetricsError::BinMismatch("height histogram"));
    }
    Ok(normalized_l1(&a.class_histogram, a.occupied, &b.class_histogram, b.occupied)
        + normalized_l1(&a.height_histogram, a.occupied, &b.height_histogram, b.occupied)
        + (a.surface_to_volume - b.surface_to_volume).abs()
        + (a.column_contiguity - b.column_contiguity).abs())
}
