use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, Vec3};

/// Points closer than this to the image plane cannot be projected.
pub const MIN_PROJECT_DEPTH: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CameraError {
    #[error("focal lengths must be positive (fx = {fx}, fy = {fy})")]
    BadFocal { fx: f64, fy: f64 },
    #[error("principal point ({cx}, {cy}) outside a {width}x{height} image")]
    BadPrincipalPoint { cx: f64, cy: f64, width: u32, height: u32 },
    #[error("intrinsics must have zero skew and last row [0, 0, 1]")]
    NotPinhole,
}

/// Pinhole camera without distortion. Pixel `(i, j)` covers `[i, i+1) × [j, j+1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PixelProjection {
    pub u: f64,
    pub v: f64,
    pub z: f64,
}

impl CameraModel {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self, CameraError> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(CameraError::BadFocal { fx, fy });
        }
        if !(cx >= 0.0 && cx < width as f64 && cy >= 0.0 && cy < height as f64) {
            return Err(CameraError::BadPrincipalPoint { cx, cy, width, height });
        }
        Ok(Self { fx, fy, cx, cy, width, height })
    }

    pub fn from_intrinsics(k: &Matrix3<f64>, width: u32, height: u32) -> Result<Self, CameraError> {
        let off = k[(0, 1)].abs() + k[(1, 0)].abs() + k[(2, 0)].abs() + k[(2, 1)].abs();
        if off > 1e-9 || (k[(2, 2)] - 1.0).abs() > 1e-9 {
            return Err(CameraError::NotPinhole);
        }
        Self::new(k[(0, 0)], k[(1, 1)], k[(0, 2)], k[(1, 2)], width, height)
    }

    pub fn intrinsics(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// Pinhole projection of a camera-frame point.
    pub fn project(&self, p_cam: &Vec3) -> Result<PixelProjection, GeometryError> {
        if !(p_cam.z > MIN_PROJECT_DEPTH) {
            return Err(GeometryError::BehindCamera(p_cam.z));
        }
        Ok(PixelProjection {
            u: self.fx * p_cam.x / p_cam.z + self.cx,
            v: self.fy * p_cam.y / p_cam.z + self.cy,
            z: p_cam.z,
        })
    }

    /// Inverse of [`project`](Self::project) for a known depth.
    pub fn unproject(&self, u: f64, v: f64, depth: f64) -> Vec3 {
        Vec3::new(
            (u - self.cx) / self.fx * depth,
            (v - self.cy) / self.fy * depth,
            depth,
        )
    }

    /// Same field of view at a different resolution.
    pub fn scaled(&self, factor: f64) -> Self {
        let width = ((self.width as f64 * factor).round() as u32).max(1);
        let height = ((self.height as f64 * factor).round() as u32).max(1);
        let sx = width as f64 / self.width as f64;
        let sy = height as f64 / self.height as f64;
        Self {
            fx: self.fx * sx,
            fy: self.fy * sy,
            cx: self.cx * sx,
            cy: self.cy * sy,
            width,
            height,
        }
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u <= self.width as f64 && v <= self.height as f64
    }
}
