use super::{Ray, RenderError};
use crate::camsample::CameraPose;

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Intrinsics {
    pub width: u32,
    pub height: u32,
    /// Vertical field of view, degrees.
    pub fov_deg: f64,
}

/// Pinhole camera. Yaw turns about +z from +x, positive pitch looks down,
/// roll turns about the view direction.
#[derive(Clone, Debug, PartialEq)]
pub struct Camera {
    pub origin: [f64; 3],
    pub forward: [f64; 3],
    pub right: [f64; 3],
    pub up: [f64; 3],
    width: f64,
    height: f64,
    tan_y: f64,
    tan_x: f64,
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

impl Camera {
    pub fn new(pose: &CameraPose, intr: Intrinsics) -> Result<Self, RenderError> {
        if !(intr.fov_deg > 0.0 && intr.fov_deg < 180.0) {
            return Err(RenderError::Fov(intr.fov_deg));
        }
        if intr.width == 0 || intr.height == 0 {
            return Err(RenderError::ZeroSize);
        }
        let (yaw, pitch, roll) = (
            pose.yaw.to_radians(),
            pose.pitch.to_radians(),
            pose.roll.to_radians(),
        );
        let forward = [pitch.cos() * yaw.cos(), pitch.cos() * yaw.sin(), -pitch.sin()];
        let right0 = [yaw.sin(), -yaw.cos(), 0.0];
        let up0 = [
            right0[1] * forward[2] - right0[2] * forward[1],
            right0[2] * forward[0] - right0[0] * forward[2],
            right0[0] * forward[1] - right0[1] * forward[0],
        ];
        let (s, c) = roll.sin_cos();
        let right = std::array::from_fn(|i| c * right0[i] + s * up0[i]);
        let up = std::array::from_fn(|i| -s * right0[i] + c * up0[i]);
        let tan_y = (intr.fov_deg.to_radians() / 2.0).tan();
        Ok(Self {
            origin: pose.position,
            forward,
            right,
            up,
            width: intr.width as f64,
            height: intr.height as f64,
            tan_y,
            tan_x: tan_y * intr.width as f64 / intr.height as f64,
        })
    }

    /// Ray through continuous image coordinates; pixel `(i, j)` has its
    /// center at `(i + 0.5, j + 0.5)` and `v` grows downward.
    pub fn ray(&self, u: f64, v: f64) -> Ray {
        let x = (2.0 * u / self.width - 1.0) * self.tan_x;
        let y = (1.0 - 2.0 * v / self.height) * self.tan_y;
        let d = std::array::from_fn(|i| self.forward[i] + x * self.right[i] + y * self.up[i]);
        Ray::new(self.origin, d).expect("forward is a unit vector")
    }

    /// Image coordinates of a point in front of the camera.
    pub fn project(&self, p: [f64; 3]) -> Option<(f64, f64)> {
        let q = [p[0] - self.origin[0], p[1] - self.origin[1], p[2] - self.origin[2]];
        let z = dot(q, self.forward);
        if z <= 0.0 {
            return None;
        }
        let x = dot(q, self.right) / z;
        let y = dot(q, self.up) / z;
        Some((
            (x / self.tan_x + 1.0) * self.width / 2.0,
            (1.0 - y / self.tan_y) * self.height / 2.0,
        ))
    }
}
