//! Unbounded latent field and the spatially independent map generator built
//! on top of it.
//!
//! Every output pixel is a pure function of the global latent and of the
//! local latent cells whose centers lie within the receptive-field radius.
//! That locality is what lets a region be synthesized patch by patch through
//! a FIFO queue, and lets a user resample a region while only recomputing the
//! patches its latents can reach.

mod calibrate;
mod field;
mod generator;
mod queue;
mod rect;

pub use calibrate::{
    calibrate_region, cell_center, patches_overlapping, resample_region, resample_region_in_place,
    synthesize_region, synthesize_region_batched, ResampleOutcome,
};
pub use field::{sample_field, CellCoord, LatentField, ICLF_MAGIC, ICLF_VERSION};
pub use generator::{GeneratorConfig, PatchGenerator, ProceduralGenerator};
pub use queue::{flush_queue, CompletedJob, FlushReport, JobId, JobQueue, JobState, SynthesisJob};
pub use rect::{PixelRect, ReceptiveField};

use thiserror::Error;

/// Defaults: global dim, local dim, cell stride, patch size, receptive radius.
pub const DEFAULT_GLOBAL_DIM: usize = 64;
pub const DEFAULT_LOCAL_DIM: usize = 16;
pub const DEFAULT_CELL_STRIDE: u32 = 32;
pub const DEFAULT_PATCH_SIZE: u32 = 64;
pub const DEFAULT_RADIUS_PX: u32 = 64;

#[derive(Debug, Error, PartialEq)]
pub enum LatentGridError {
    #[error("{0} must be positive")]
    ZeroDimension(&'static str),
    #[error("rectangle is empty")]
    EmptyRect,
    #[error("batch size must be at least 1")]
    ZeroBatch,
    #[error("job rectangle {got:?} does not match the {expected}px patch size")]
    PatchSize { expected: u32, got: PixelRect },
    #[error("cell stride {stride} does not divide patch size {patch}")]
    StrideMismatch { stride: u32, patch: u32 },
    #[error("malformed latent snapshot at byte {offset}: {message}")]
    Snapshot { offset: usize, message: String },
    #[error("cannot parse rectangle {0:?}, expected X,Y,W,H")]
    RectSyntax(String),
}
