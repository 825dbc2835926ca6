//! Pose-based frame subsampling.
//!
//! A frame is dropped when some already-kept frame lies within `d_th` meters
//! of it and is rotated by less than `theta_th` degrees relative to it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Mat3, RigidTransform};
use crate::scene::{FrameIndex, FrameMeta};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SubsampleConfigError {
    #[error("translation threshold must be >= 0, got {0}")]
    NegativeDistance(f64),
    #[error("rotation threshold must lie in [0, 180] degrees, got {0}")]
    AngleOutOfRange(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsampleConfig {
    /// Meters.
    pub d_th: f64,
    /// Degrees.
    pub theta_th: f64,
}

impl SubsampleConfig {
    pub fn new(d_th: f64, theta_th: f64) -> Result<Self, SubsampleConfigError> {
        let cfg = Self { d_th, theta_th };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SubsampleConfigError> {
        if !(self.d_th >= 0.0) {
            return Err(SubsampleConfigError::NegativeDistance(self.d_th));
        }
        if !(0.0..=180.0).contains(&self.theta_th) {
            return Err(SubsampleConfigError::AngleOutOfRange(self.theta_th));
        }
        Ok(())
    }

    pub const SCANNET: Self = Self {
        d_th: 0.5,
        theta_th: 15.0,
    };

    pub const SCANNETPP: Self = Self {
        d_th: 0.5,
        theta_th: 45.0,
    };
}

/// Angle of the relative rotation `R_iᵀ R_j`, in degrees within [0, 180].
pub fn rotation_angle_deg(r_i: &Mat3, r_j: &Mat3) -> f64 {
    let rel = r_i.transpose() * r_j;
    let c = ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    c.acos().to_degrees()
}

fn redundant(kept: &RigidTransform, candidate: &RigidTransform, cfg: &SubsampleConfig) -> bool {
    let d = (kept.translation() - candidate.translation()).norm();
    d <= cfg.d_th && rotation_angle_deg(kept.rotation(), candidate.rotation()) < cfg.theta_th
}

/// Positions (into `poses`) of the frames that survive subsampling.
pub fn subsample_poses(poses: &[RigidTransform], cfg: &SubsampleConfig) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    for (j, pose) in poses.iter().enumerate() {
        if !kept.iter().any(|&i| redundant(&poses[i], pose, cfg)) {
            kept.push(j);
        }
    }
    kept
}

/// Frame indices that survive subsampling, in input order.
pub fn subsample_frames(frames: &[FrameMeta], cfg: &SubsampleConfig) -> Vec<FrameIndex> {
    let poses: Vec<RigidTransform> = frames.iter().map(|f| f.pose).collect();
    subsample_poses(&poses, cfg)
        .into_iter()
        .map(|i| frames[i].frame_index)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{axis_angle_deg, Vec3};
    use approx::assert_abs_diff_eq;

    #[test]
    fn larger_threshold_can_keep_more() {
        let at = |x, y| RigidTransform::new(Mat3::identity(), Vec3::new(x, y, 0.0)).unwrap();
        let poses = [at(0.0, 0.0), at(1.4, 0.0), at(1.4, 0.95), at(1.4, -0.95)];
        let tight = subsample_poses(&poses, &SubsampleConfig::new(1.0, 180.0).unwrap());
        let loose = subsample_poses(&poses, &SubsampleConfig::new(1.5, 180.0).unwrap());
        assert_eq!(tight, vec![0, 1]);
        assert_eq!(loose, vec![0, 2, 3]);
    }

    #[test]
    fn angle_identity() {
        assert_eq!(rotation_angle_deg(&Mat3::identity(), &Mat3::identity()), 0.0);
    }

    #[test]
    fn angle_thirty_about_z() {
        let r = axis_angle_deg(&Vec3::z(), 30.0);
        assert_abs_diff_eq!(rotation_angle_deg(&Mat3::identity(), &r), 30.0, epsilon = 1e-9);
    }

    #[test]
    fn angle_half_turn_about_x() {
        let r = axis_angle_deg(&Vec3::x(), 180.0);
        assert_abs_diff_eq!(rotation_angle_deg(&Mat3::identity(), &r), 180.0, epsilon = 1e-6);
    }

    #[test]
    fn angle_clamps_numerical_drift() {
        let mut r = Mat3::identity();
        r[(0, 0)] = 1.0 + 1e-12;
        assert_eq!(rotation_angle_deg(&Mat3::identity(), &r), 0.0);
    }

    fn line(xs: &[f64]) -> Vec<RigidTransform> {
        xs.iter()
            .map(|&x| RigidTransform::from_translation(Vec3::new(x, 0.0, 0.0)))
            .collect()
    }

    #[test]
    fn drops_close_frames() {
        let kept = subsample_poses(&line(&[0.0, 0.1, 1.0]), &SubsampleConfig::SCANNET);
        assert_eq!(kept, vec![0, 2]);
    }

    #[test]
    fn zero_distance_threshold_keeps_distinct_positions() {
        let cfg = SubsampleConfig::new(0.0, 15.0).unwrap();
        let kept = subsample_poses(&line(&[0.0, 0.01, 0.02, 0.03]), &cfg);
        assert_eq!(kept, vec![0, 1, 2, 3]);
        // an exact duplicate is still dropped (d <= d_th)
        assert_eq!(subsample_poses(&line(&[0.0, 0.0]), &cfg), vec![0]);
    }

    #[test]
    fn distance_boundary_is_inclusive() {
        let cfg = SubsampleConfig::new(0.5, 15.0).unwrap();
        assert_eq!(subsample_poses(&line(&[0.0, 0.5]), &cfg), vec![0]);
    }

    #[test]
    fn rotation_keeps_nearby_frame() {
        let a = RigidTransform::identity();
        let b = RigidTransform::new(axis_angle_deg(&Vec3::z(), 20.0), Vec3::zeros()).unwrap();
        let c = RigidTransform::new(axis_angle_deg(&Vec3::z(), 14.0), Vec3::zeros()).unwrap();
        let cfg = SubsampleConfig::SCANNET;
        assert_eq!(subsample_poses(&[a, b], &cfg), vec![0, 1]);
        assert_eq!(subsample_poses(&[a, c], &cfg), vec![0]);
    }

    #[test]
    fn compares_against_all_kept_frames() {
        // frame 2 returns next to frame 0 after frame 1 moved away
        let kept = subsample_poses(&line(&[0.0, 1.0, 0.05]), &SubsampleConfig::SCANNET);
        assert_eq!(kept, vec![0, 1]);
    }

    #[test]
    fn config_validation() {
        assert!(SubsampleConfig::new(-0.1, 10.0).is_err());
        assert!(SubsampleConfig::new(0.1, 181.0).is_err());
        assert!(SubsampleConfig::new(0.1, 180.0).is_ok());
    }
}
