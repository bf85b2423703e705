//! Pinhole intrinsics and rigid camera poses.
//!
//! Camera frame: x right, y down, z forward. A pixel `(u, v)` covers
//! `[u, u+1) × [v, v+1)` and its ray passes through the pixel center.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{Mat3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Default for Intrinsics {
    /// 160×80 (width×height), about 77° horizontal field of view.
    fn default() -> Self {
        Self::with_size(160, 80)
    }
}

impl Intrinsics {
    /// Centered principal point and a focal length proportional to the width.
    pub fn with_size(width: usize, height: usize) -> Self {
        let f = width as f64 * 0.625;
        Self {
            fx: f,
            fy: f,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            width,
            height,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::InvalidConfig("focal lengths must be positive"));
        }
        if !(self.cx > 0.0 && self.cx < self.width as f64) {
            return Err(Error::InvalidConfig("cx must lie inside the image"));
        }
        if !(self.cy > 0.0 && self.cy < self.height as f64) {
            return Err(Error::InvalidConfig("cy must lie inside the image"));
        }
        Ok(())
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Camera-frame ray through the pixel center, scaled so that `z = 1`.
    pub fn pixel_ray(&self, u: usize, v: usize) -> Vec3 {
        Vec3::new(
            (u as f64 + 0.5 - self.cx) / self.fx,
            (v as f64 + 0.5 - self.cy) / self.fy,
            1.0,
        )
    }

    /// Pixel containing the projection of a camera-frame point in front of the camera.
    pub fn project(&self, p: Vec3) -> Option<(usize, usize)> {
        if p.z <= 0.0 {
            return None;
        }
        let u = self.fx * p.x / p.z + self.cx;
        let v = self.fy * p.y / p.z + self.cy;
        if u < 0.0 || v < 0.0 || u >= self.width as f64 || v >= self.height as f64 {
            return None;
        }
        Some((u as usize, v as usize))
    }
}

/// World←camera rigid transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl Pose {
    pub const IDENTITY: Pose = Pose {
        rotation: Mat3::IDENTITY,
        translation: Vec3::ZERO,
    };

    pub fn new(rotation: Mat3, translation: Vec3) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    /// Camera at `eye` looking at `target`; world `up` keeps image rows level.
    pub fn look_at(eye: Vec3, target: Vec3, up: Vec3) -> Option<Pose> {
        let forward = target - eye;
        if forward.norm() < 1e-9 {
            return None;
        }
        let z = forward.normalized();
        let right = z.cross(up);
        if right.norm() < 1e-9 {
            return None;
        }
        let x = right.normalized();
        let y = z.cross(x);
        Some(Pose::new(Mat3::from_columns(x, y, z), eye))
    }

    pub fn center(&self) -> Vec3 {
        self.translation
    }

    pub fn to_world(&self, p_cam: Vec3) -> Vec3 {
        self.rotation.mul_vec(p_cam) + self.translation
    }

    pub fn to_camera(&self, p_world: Vec3) -> Vec3 {
        self.rotation.transpose().mul_vec(p_world - self.translation)
    }

    pub fn rotate(&self, d_cam: Vec3) -> Vec3 {
        self.rotation.mul_vec(d_cam)
    }

    pub fn validate(&self) -> Result<()> {
        if (self.rotation.determinant() - 1.0).abs() > 1e-9
            || self.rotation.orthonormality_error() > 1e-9
        {
            return Err(Error::InvalidConfig("pose rotation is not a proper rotation"));
        }
        if !self.translation.is_finite() {
            return Err(Error::InvalidConfig("pose translation is not finite"));
        }
        Ok(())
    }

    /// Row-major 4×4 homogeneous matrix.
    pub fn to_matrix(&self) -> [f64; 16] {
        let r = &self.rotation.0;
        let t = self.translation;
        [
            r[0][0], r[0][1], r[0][2], t.x, //
            r[1][0], r[1][1], r[1][2], t.y, //
            r[2][0], r[2][1], r[2][2], t.z, //
            0.0, 0.0, 0.0, 1.0,
        ]
    }

    pub fn from_matrix(m: &[f64; 16]) -> Result<Pose> {
        if m[12] != 0.0 || m[13] != 0.0 || m[14] != 0.0 || m[15] != 1.0 {
            return Err(Error::InvalidConfig("pose matrix bottom row must be 0 0 0 1"));
        }
        let pose = Pose::new(
            Mat3([[m[0], m[1], m[2]], [m[4], m[5], m[6]], [m[8], m[9], m[10]]]),
            Vec3::new(m[3], m[7], m[11]),
        );
        pose.validate()?;
        Ok(pose)
    }
}
