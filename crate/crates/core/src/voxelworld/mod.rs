//! Sparse voxel blocks and the world assembled from them.

mod build;
mod codec;
mod complete;
mod lift;
mod octree;
mod world;

pub use build::{build_world, clamp_heights};
pub use codec::{
    deserialize_block, deserialize_world, serialize_block, serialize_world, ParseErrorKind,
    IOCT_HEADER_LEN, IOCT_MAGIC, IWRL_MAGIC,
};
pub use complete::{
    complete, complete_pillar, complete_watertight, watertight_violations, Completion,
    CANOPY_THICKNESS,
};
pub use lift::lift_tile;
pub use octree::{Node, OctreeBlock, Voxel, BLOCK_DEPTH, BLOCK_EDGE};
pub use world::{assemble_world, to_point_cloud, VoxelWorld, FEATURE_DIM};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum VoxelError {
    #[error("tile is {w}x{h}, expected {BLOCK_EDGE}x{BLOCK_EDGE}")]
    TileSize { w: usize, h: usize },
    #[error("height {h} at ({x}, {y}) is outside the block (max {})", BLOCK_EDGE - 1)]
    HeightOutOfRange { x: usize, y: usize, h: u16 },
    #[error("column ({x}, {y}) holds more than one voxel; expected a surface block")]
    NotSurface { x: usize, y: usize },
    #[error("block ({0}, {1}) given twice")]
    OverlappingBlock(i32, i32),
    #[error("block ({0}, {1}) missing from the world rectangle")]
    MissingBlock(i32, i32),
    #[error("malformed block stream at byte {offset}: {kind}")]
    Parse { offset: usize, kind: ParseErrorKind },
    #[error("unknown completion mode {0:?}, expected pillar or watertight")]
    UnknownCompletion(String),
}
