//! Mesh ingestion: surface sampling, voxelization and top-down scans.

mod mesh;
mod sample;
mod scan;
mod voxelize;

pub use mesh::{LabeledMesh, Triangle};
pub use sample::{sample_surface, SurfacePoint, SurfacePointSet, POINTS_PER_EDGE};
pub use scan::topdown_scan;
pub use voxelize::{voxelize, voxelize_all};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum IngestError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("triangle {triangle} references vertex {index}, mesh has {count}")]
    IndexOutOfRange {
        triangle: usize,
        index: u32,
        count: usize,
    },
    #[error("triangle {0} has a non-unit normal")]
    BadNormal(usize),
    #[error("triangle {triangle} has class {class}, outside the palette")]
    BadClass { triangle: usize, class: u8 },
    #[error("voxel size must be positive and finite, got {0}")]
    VoxelSize(f64),
}
