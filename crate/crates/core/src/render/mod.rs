//! First-hit voxel ray casting with corner-feature retrieval and a fixed
//! shader.

mod camera;
mod shade;
mod traverse;

pub use camera::{Camera, Intrinsics};
pub use shade::{
    depth_from_bytes, depth_to_bytes, render_view, shade_ray, trilinear_features,
    trilinear_features_at, trilinear_weights, PixelSample, RenderOutput, Style, DEPTH_MAGIC,
};
pub use traverse::{traverse, traverse_visiting, Hit, Ray, GRAZE_EPS};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RenderError {
    #[error("field of view must lie in (0, 180) degrees, got {0}")]
    Fov(f64),
    #[error("image size must be non-zero")]
    ZeroSize,
    #[error("point {0:?} is not inside an occupied voxel")]
    EmptySpace([f64; 3]),
    #[error("malformed depth file: {0}")]
    DepthFormat(String),
}
