//! Rigid transforms, oriented boxes and small vector helpers.
//!
//! Poses are always stored camera-to-world. The camera frame is x-right,
//! y-down, z-forward.

use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// A point or direction in meters.
pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Tolerance used when validating rotation matrices.
pub const ROTATION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("rotation is not orthonormal (max |RᵀR - I| = {0:e})")]
    NotOrthonormal(f64),
    #[error("rotation is not proper (det = {0})")]
    NotProper(f64),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("point is behind the camera (z = {0})")]
    BehindCamera(f64),
    #[error("homogeneous row of a 4x4 pose must be [0, 0, 0, 1]")]
    BadHomogeneousRow,
}

pub fn is_finite(v: &Vec3) -> bool {
    v.iter().all(|c| c.is_finite())
}

fn check_rotation(r: &Mat3) -> Result<(), GeometryError> {
    if !r.iter().all(|c| c.is_finite()) {
        return Err(GeometryError::NonFinite("rotation"));
    }
    let err = (r.transpose() * r - Mat3::identity()).abs().max();
    if err > ROTATION_TOLERANCE {
        return Err(GeometryError::NotOrthonormal(err));
    }
    let det = r.determinant();
    if (det - 1.0).abs() > ROTATION_TOLERANCE {
        return Err(GeometryError::NotProper(det));
    }
    Ok(())
}

/// Projects a nearly-orthonormal matrix onto SO(3) through its SVD.
pub fn nearest_rotation(m: &Mat3) -> Mat3 {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let mut d = Mat3::identity();
    if (u * v_t).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    u * d * v_t
}

/// Rotation about a unit axis by an angle in degrees.
pub fn axis_angle_deg(axis: &Vec3, angle_deg: f64) -> Mat3 {
    let axis = nalgebra::Unit::new_normalize(*axis);
    *nalgebra::Rotation3::from_axis_angle(&axis, angle_deg.to_radians()).matrix()
}

/// An SE(3) element: `p_world = rotation * p_local + translation`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidTransform {
    rotation: Mat3,
    translation: Vec3,
}

impl RigidTransform {
    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self, GeometryError> {
        check_rotation(&rotation)?;
        if !is_finite(&translation) {
            return Err(GeometryError::NonFinite("translation"));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Builds a transform whose rotation is re-projected onto SO(3) first.
    /// Used for ingesting poses stored at reduced precision.
    pub fn new_orthonormalized(rotation: Mat3, translation: Vec3) -> Result<Self, GeometryError> {
        let err = (rotation.transpose() * rotation - Mat3::identity()).abs().max();
        if err > 1e-3 {
            return Err(GeometryError::NotOrthonormal(err));
        }
        Self::new(nearest_rotation(&rotation), translation)
    }

    pub fn identity() -> Self {
        Self {
            rotation: Mat3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self {
            rotation: Mat3::identity(),
            translation,
        }
    }

    pub fn from_matrix4(m: &Matrix4<f64>) -> Result<Self, GeometryError> {
        let last = m.row(3);
        if (last[0].abs() + last[1].abs() + last[2].abs() + (last[3] - 1.0).abs()) > 1e-9 {
            return Err(GeometryError::BadHomogeneousRow);
        }
        let rotation: Mat3 = m.fixed_view::<3, 3>(0, 0).into_owned();
        let translation: Vec3 = m.fixed_view::<3, 1>(0, 3).into_owned();
        Self::new(rotation, translation)
    }

    pub fn to_matrix4(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn from_rows(rows: &[[f64; 4]; 4]) -> Result<Self, GeometryError> {
        Self::from_matrix4(&Matrix4::from_fn(|i, j| rows[i][j]))
    }

    pub fn to_rows(&self) -> [[f64; 4]; 4] {
        let m = self.to_matrix4();
        let mut rows = [[0.0; 4]; 4];
        for (i, row) in rows.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = m[(i, j)];
            }
        }
        rows
    }

    pub fn rotation(&self) -> &Mat3 {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self * other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn inverse_transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation.transpose() * (p - self.translation)
    }

    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    /// Camera forward (+z) axis in world coordinates.
    pub fn forward(&self) -> Vec3 {
        self.rotation.column(2).into_owned()
    }
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl Serialize for RigidTransform {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for RigidTransform {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows = <[[f64; 4]; 4]>::deserialize(d)?;
        RigidTransform::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Maps a world point into the camera frame of a camera-to-world pose.
pub fn world_to_camera(pose: &RigidTransform, p: &Vec3) -> Vec3 {
    pose.inverse_transform_point(p)
}

pub fn camera_to_world(pose: &RigidTransform, p: &Vec3) -> Vec3 {
    pose.transform_point(p)
}

/// Row-major (de)serialization for 3×3 matrices.
pub mod mat3_rows {
    use super::Mat3;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn to_rows(m: &Mat3) -> [[f64; 3]; 3] {
        let mut rows = [[0.0; 3]; 3];
        for (i, row) in rows.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = m[(i, j)];
            }
        }
        rows
    }

    pub fn from_rows(rows: &[[f64; 3]; 3]) -> Mat3 {
        Mat3::from_fn(|i, j| rows[i][j])
    }

    pub fn serialize<S: Serializer>(m: &Mat3, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Mat3, D::Error> {
        Ok(from_rows(&<[[f64; 3]; 3]>::deserialize(d)?))
    }
}

/// Oriented bounding box in world coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox {
    pub center: Vec3,
    pub half_extents: Vec3,
    #[serde(with = "mat3_rows")]
    pub rotation: Mat3,
}

impl OrientedBox {
    pub fn new(center: Vec3, half_extents: Vec3, rotation: Mat3) -> Result<Self, GeometryError> {
        check_rotation(&rotation)?;
        if !is_finite(&center) || !is_finite(&half_extents) {
            return Err(GeometryError::NonFinite("box"));
        }
        Ok(Self {
            center,
            half_extents,
            rotation,
        })
    }

    pub fn axis_aligned(center: Vec3, half_extents: Vec3) -> Self {
        Self {
            center,
            half_extents,
            rotation: Mat3::identity(),
        }
    }

    /// The 8 corners; bit `i` of the index selects the sign along local axis `i`.
    pub fn corners(&self) -> [Vec3; 8] {
        std::array::from_fn(|k| {
            let s = |bit: usize| if k >> bit & 1 == 1 { 1.0 } else { -1.0 };
            let local = Vec3::new(
                s(0) * self.half_extents.x,
                s(1) * self.half_extents.y,
                s(2) * self.half_extents.z,
            );
            self.center + self.rotation * local
        })
    }

    pub fn axis(&self, i: usize) -> Vec3 {
        self.rotation.column(i).into_owned()
    }

    /// World axis-aligned hull as (min, max).
    pub fn aabb(&self) -> (Vec3, Vec3) {
        let extent = self.rotation.abs() * self.half_extents;
        (self.center - extent, self.center + extent)
    }

    /// Separating-axis test. Touching boxes count as intersecting.
    pub fn intersects(&self, other: &OrientedBox) -> bool {
        let d = other.center - self.center;
        let mut axes: Vec<Vec3> = Vec::with_capacity(15);
        for i in 0..3 {
            axes.push(self.axis(i));
            axes.push(other.axis(i));
        }
        for i in 0..3 {
            for j in 0..3 {
                let c = self.axis(i).cross(&other.axis(j));
                if c.norm_squared() > 1e-12 {
                    axes.push(c.normalize());
                }
            }
        }
        axes.iter().all(|axis| {
            let ra: f64 = (0..3)
                .map(|i| self.half_extents[i] * self.axis(i).dot(axis).abs())
                .sum();
            let rb: f64 = (0..3)
                .map(|i| other.half_extents[i] * other.axis(i).dot(axis).abs())
                .sum();
            d.dot(axis).abs() <= ra + rb
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_world_to_camera() {
        let p = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(world_to_camera(&RigidTransform::identity(), &p), p);
    }

    #[test]
    fn camera_center_maps_to_origin() {
        let pose = RigidTransform::from_translation(Vec3::new(0.0, 0.0, 5.0));
        let p = world_to_camera(&pose, &Vec3::new(0.0, 0.0, 5.0));
        assert_abs_diff_eq!(p.norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn yaw_pose_matches_dense_matrix_inverse() {
        let rot = axis_angle_deg(&Vec3::z(), 90.0);
        let pose = RigidTransform::new(rot, Vec3::new(1.0, 0.0, 0.0)).unwrap();
        let p = Vec3::new(1.0, 1.0, 0.0);
        let inv = pose.to_matrix4().try_inverse().unwrap();
        let expected = inv * nalgebra::Vector4::new(p.x, p.y, p.z, 1.0);
        let got = world_to_camera(&pose, &p);
        // R⁻¹((1,1,0) - (1,0,0)) with R = yaw 90° gives (1, 0, 0).
        assert_abs_diff_eq!(got, Vec3::new(expected.x, expected.y, expected.z), epsilon = 1e-12);
        assert_abs_diff_eq!(got, Vec3::new(1.0, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn rejects_reflection() {
        let mut r = Mat3::identity();
        r[(0, 0)] = -1.0;
        assert!(matches!(
            RigidTransform::new(r, Vec3::zeros()),
            Err(GeometryError::NotProper(_))
        ));
    }

    #[test]
    fn rejects_bad_homogeneous_row() {
        let mut rows = RigidTransform::identity().to_rows();
        rows[3][0] = 0.5;
        assert_eq!(
            RigidTransform::from_rows(&rows),
            Err(GeometryError::BadHomogeneousRow)
        );
    }

    #[test]
    fn orthonormalize_repairs_rounding() {
        let mut r = axis_angle_deg(&Vec3::new(1.0, 2.0, 3.0), 37.0);
        r[(0, 1)] += 5e-5;
        assert!(RigidTransform::new(r, Vec3::zeros()).is_err());
        let fixed = RigidTransform::new_orthonormalized(r, Vec3::zeros()).unwrap();
        assert!((fixed.rotation().determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn corners_average_to_center() {
        let b = OrientedBox::new(
            Vec3::new(1.0, -2.0, 0.5),
            Vec3::new(0.3, 0.2, 0.7),
            axis_angle_deg(&Vec3::new(0.2, 1.0, 0.1), 33.0),
        )
        .unwrap();
        let corners = b.corners();
        assert_eq!(corners.len(), 8);
        let mean = corners.iter().sum::<Vec3>() / 8.0;
        assert_abs_diff_eq!(mean, b.center, epsilon = 1e-9);
    }

    #[test]
    fn corner_distances_respect_box_symmetries() {
        // Axis-aligned box: every signed permutation of axes that maps the box
        // to itself must preserve all pairwise corner distances.
        let b = OrientedBox::axis_aligned(Vec3::zeros(), Vec3::new(1.0, 1.0, 1.0));
        let corners = b.corners();
        let perms = [
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ];
        let mut checks = 0;
        for perm in perms {
            for signs in 0..8 {
                let map = |p: &Vec3| {
                    Vec3::from_fn(|i, _| {
                        let s = if signs >> i & 1 == 1 { -1.0 } else { 1.0 };
                        s * p[perm[i]]
                    })
                };
                for a in 0..8 {
                    for c in 0..8 {
                        let d0 = (corners[a] - corners[c]).norm();
                        let d1 = (map(&corners[a]) - map(&corners[c])).norm();
                        assert_abs_diff_eq!(d0, d1, epsilon = 1e-12);
                    }
                }
                // mapped corners are again corners
                for a in 0..8 {
                    let m = map(&corners[a]);
                    assert!(corners.iter().any(|c| (c - m).norm() < 1e-12));
                }
                checks += 1;
            }
        }
        assert_eq!(checks, 48);
    }

    #[test]
    fn sat_detects_overlap_and_separation() {
        let a = OrientedBox::axis_aligned(Vec3::zeros(), Vec3::repeat(0.5));
        let b = OrientedBox::axis_aligned(Vec3::new(0.5, 0.0, 0.0), Vec3::repeat(0.5));
        let c = OrientedBox::axis_aligned(Vec3::new(2.0, 0.0, 0.0), Vec3::repeat(0.5));
        assert!(a.intersects(&b));
        assert!(!a.intersects(&c));
        // A rotated box whose corner pokes into `a` only along the diagonal.
        let r = OrientedBox::new(
            Vec3::new(1.15, 0.0, 0.0),
            Vec3::repeat(0.5),
            axis_angle_deg(&Vec3::z(), 45.0),
        )
        .unwrap();
        assert!(a.intersects(&r));
        let r_far = OrientedBox { center: Vec3::new(1.25, 0.0, 0.0), ..r };
        assert!(!a.intersects(&r_far));
    }

    #[test]
    fn pose_json_is_row_major() {
        let pose = RigidTransform::from_translation(Vec3::new(1.0, 2.0, 3.0));
        let json = serde_json::to_string(&pose).unwrap();
        assert_eq!(json, "[[1.0,0.0,0.0,1.0],[0.0,1.0,0.0,2.0],[0.0,0.0,1.0,3.0],[0.0,0.0,0.0,1.0]]");
        let back: RigidTransform = serde_json::from_str(&json).unwrap();
        assert_eq!(back, pose);
    }
}
