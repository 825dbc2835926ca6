//! Z-buffer rasterization of a triangle mesh into a per-pixel face map.
//!
//! Triangles are clipped against the plane `z = NEAR_PLANE` in camera space,
//! then scan-converted at pixel centers. Depth is interpolated as `1/z`, which
//! is affine in screen space, so the stored depth equals the camera-frame `z`
//! of the surface point seen through the pixel center. No back-face culling.

use crate::camera::CameraModel;
use crate::geometry::{RigidTransform, Vec3};
use crate::scene::TriangleMesh;

/// Camera-space clipping plane, meters.
pub const NEAR_PLANE: f64 = 0.01;

#[derive(Clone, Debug, PartialEq)]
pub struct RasterResult {
    width: u32,
    height: u32,
    /// Row-major, `-1` where no face covers the pixel.
    pix_to_face: Vec<i32>,
    /// Row-major depth in meters, `+inf` where uncovered.
    z_buffer: Vec<f64>,
}

impl RasterResult {
    fn empty(width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        Self {
            width,
            height,
            pix_to_face: vec![-1; n],
            z_buffer: vec![f64::INFINITY; n],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn face_at(&self, x: u32, y: u32) -> Option<u32> {
        let f = self.pix_to_face[(y * self.width + x) as usize];
        (f >= 0).then_some(f as u32)
    }

    pub fn depth_at(&self, x: u32, y: u32) -> Option<f64> {
        self.face_at(x, y)
            .map(|_| self.z_buffer[(y * self.width + x) as usize])
    }

    pub fn pix_to_face(&self) -> &[i32] {
        &self.pix_to_face
    }

    pub fn z_buffer(&self) -> &[f64] {
        &self.z_buffer
    }

    /// Faces that own at least one pixel.
    pub fn visible_faces(&self, face_count: usize) -> Vec<bool> {
        let mut seen = vec![false; face_count];
        for &f in &self.pix_to_face {
            if f >= 0 {
                seen[f as usize] = true;
            }
        }
        seen
    }

    pub fn covered_pixels(&self) -> usize {
        self.pix_to_face.iter().filter(|&&f| f >= 0).count()
    }
}

#[derive(Clone, Copy)]
struct ScreenVertex {
    u: f64,
    v: f64,
    inv_z: f64,
}

fn clip_near(tri: [Vec3; 3]) -> Vec<Vec3> {
    let mut out = Vec::with_capacity(4);
    for i in 0..3 {
        let a = tri[i];
        let b = tri[(i + 1) % 3];
        let a_in = a.z >= NEAR_PLANE;
        let b_in = b.z >= NEAR_PLANE;
        if a_in {
            out.push(a);
        }
        if a_in != b_in {
            let t = (NEAR_PLANE - a.z) / (b.z - a.z);
            let mut p = a + (b - a) * t;
            p.z = NEAR_PLANE;
            out.push(p);
        }
    }
    out
}

fn edge(a: ScreenVertex, b: ScreenVertex, px: f64, py: f64) -> f64 {
    (b.u - a.u) * (py - a.v) - (b.v - a.v) * (px - a.u)
}

fn draw_triangle(out: &mut RasterResult, tri: [ScreenVertex; 3], face: i32) {
    let [p0, p1, p2] = tri;
    let area = edge(p0, p1, p2.u, p2.v);
    if area.abs() < 1e-12 || !area.is_finite() {
        return;
    }
    let min_u = p0.u.min(p1.u).min(p2.u);
    let max_u = p0.u.max(p1.u).max(p2.u);
    let min_v = p0.v.min(p1.v).min(p2.v);
    let max_v = p0.v.max(p1.v).max(p2.v);
    let x0 = (min_u - 0.5).ceil().max(0.0);
    let x1 = (max_u - 0.5).floor().min(out.width as f64 - 1.0);
    let y0 = (min_v - 0.5).ceil().max(0.0);
    let y1 = (max_v - 0.5).floor().min(out.height as f64 - 1.0);
    if x0 > x1 || y0 > y1 {
        return;
    }
    let sign = area.signum();
    let inv_area = 1.0 / area;
    for y in y0 as u32..=y1 as u32 {
        let py = y as f64 + 0.5;
        for x in x0 as u32..=x1 as u32 {
            let px = x as f64 + 0.5;
            let w0 = edge(p1, p2, px, py);
            let w1 = edge(p2, p0, px, py);
            let w2 = edge(p0, p1, px, py);
            if w0 * sign < 0.0 || w1 * sign < 0.0 || w2 * sign < 0.0 {
                continue;
            }
            let inv_z = (w0 * p0.inv_z + w1 * p1.inv_z + w2 * p2.inv_z) * inv_area;
            let z = 1.0 / inv_z;
            let idx = (y * out.width + x) as usize;
            if z < out.z_buffer[idx] {
                out.z_buffer[idx] = z;
                out.pix_to_face[idx] = face;
            }
        }
    }
}

/// Rasterizes `mesh` seen from a camera-to-world `pose` through `camera`.
pub fn rasterize_view(pose: &RigidTransform, camera: &CameraModel, mesh: &TriangleMesh) -> RasterResult {
    let mut out = RasterResult::empty(camera.width, camera.height);
    let cam_vertices: Vec<Vec3> = mesh
        .vertices()
        .iter()
        .map(|v| pose.inverse_transform_point(v))
        .collect();
    let to_screen = |p: &Vec3| ScreenVertex {
        u: camera.fx * p.x / p.z + camera.cx,
        v: camera.fy * p.y / p.z + camera.cy,
        inv_z: 1.0 / p.z,
    };
    for (face_idx, face) in mesh.faces().iter().enumerate() {
        let tri = face.map(|i| cam_vertices[i as usize]);
        if tri.iter().all(|p| p.z < NEAR_PLANE) {
            continue;
        }
        let poly = if tri.iter().all(|p| p.z >= NEAR_PLANE) {
            tri.to_vec()
        } else {
            clip_near(tri)
        };
        let screen: Vec<ScreenVertex> = poly.iter().map(to_screen).collect();
        for k in 1..screen.len().saturating_sub(1) {
            draw_triangle(&mut out, [screen[0], screen[k], screen[k + 1]], face_idx as i32);
        }
    }
    out
}
