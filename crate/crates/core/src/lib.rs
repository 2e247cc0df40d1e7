//! Infinite-extent city synthesis pipeline.
//!
//! The crate is organised by pipeline stage:
//!
//! * [`latentgrid`]: unbounded latent field, spatially independent patch
//!   generation, FIFO batched synthesis queue, receptive-field calibration
//!   and regional resampling.
//! * [`satmap`]: category/height/normal rasters, palette encode/decode,
//!   bilateral height cleaning and the `.icdn` tile format.
//! * [`ingest`]: labeled meshes to surface points, voxel blocks and
//!   top-down scans.
//! * [`voxelworld`]: sparse depth-6 octree blocks, lifting, completion,
//!   world assembly with corner features, `.ioct`/`.iwrl` files.
//! * [`camsample`]: walkable masks and collision-free camera sampling.
//! * [`render`]: voxel ray casting with trilinear corner features and a
//!   fixed shader.
//! * [`metrics`]: occupancy statistics and a distance between them.

pub mod camsample;
pub mod hash;
pub mod ingest;
pub mod latentgrid;
pub mod metrics;
pub mod render;
pub mod satmap;
pub mod voxelworld;

pub use satmap::{CdnTile, ClassId, Palette};
pub use voxelworld::{OctreeBlock, VoxelWorld};

