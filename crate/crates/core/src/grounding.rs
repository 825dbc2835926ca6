//! Decoding text box predictions into world boxes and scoring them.
//!
//! A prediction names a frame, the box center in that image (normalized to
//! 0-1000), its depth and its size:
//! `frame:12; uv:(480,520); depth:2.3; size:(0.6,0.4,0.9)`.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{OrientedBox, Vec3};
use crate::scene::{FrameIndex, FrameMeta};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GroundingError {
    #[error("unparseable prediction: {0}")]
    Unparseable(String),
    #[error("invalid prediction: {0}")]
    Invalid(String),
    #[error("prediction refers to frame {pred} but frame {given} was supplied")]
    BadFrame { pred: FrameIndex, given: FrameIndex },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonoPrediction {
    pub frame_index: FrameIndex,
    /// Image position normalized to [0, 1000].
    pub u: f64,
    pub v: f64,
    /// Meters.
    pub depth: f64,
    /// `(l, w, h)` along world x, y, z, meters.
    pub size: [f64; 3],
}

impl MonoPrediction {
    pub fn validate(&self) -> Result<(), GroundingError> {
        let bad = |m: String| Err(GroundingError::Invalid(m));
        if !(self.depth > 0.0 && self.depth.is_finite()) {
            return bad(format!("depth {} must be positive", self.depth));
        }
        if self.size.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return bad(format!("size {:?} must be positive", self.size));
        }
        if ![self.u, self.v].iter().all(|x| (0.0..=1000.0).contains(x)) {
            return bad(format!("uv ({}, {}) outside [0, 1000]", self.u, self.v));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        format!(
            "frame:{}; uv:({},{}); depth:{}; size:({},{},{})",
            self.frame_index, self.u, self.v, self.depth, self.size[0], self.size[1], self.size[2]
        )
    }
}

const NUM: &str = r"([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)";

fn field_re() -> &'static [Regex; 4] {
    static RES: OnceLock<[Regex; 4]> = OnceLock::new();
    RES.get_or_init(|| {
        let sep = r"\s*,\s*";
        [
            Regex::new(r"(?i)\bframe\s*:\s*(\d+)").unwrap(),
            Regex::new(&format!(r"(?i)\buv\s*:\s*\(\s*{NUM}{sep}{NUM}\s*\)")).unwrap(),
            Regex::new(&format!(r"(?i)\bdepth\s*:\s*{NUM}")).unwrap(),
            Regex::new(&format!(r"(?i)\bsize\s*:\s*\(\s*{NUM}{sep}{NUM}{sep}{NUM}\s*\)")).unwrap(),
        ]
    })
}

/// Parses the `frame; uv; depth; size` prediction format.
pub fn decode_prediction(text: &str) -> Result<MonoPrediction, GroundingError> {
    let [frame, uv, depth, size] = field_re();
    let missing = |what: &str| GroundingError::Unparseable(format!("missing {what}"));
    let num = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| GroundingError::Unparseable(format!("bad number {s:?}")))
    };
    let f = frame.captures(text).ok_or_else(|| missing("frame"))?;
    let uv = uv.captures(text).ok_or_else(|| missing("uv"))?;
    let d = depth.captures(text).ok_or_else(|| missing("depth"))?;
    let s = size.captures(text).ok_or_else(|| missing("size"))?;
    let pred = MonoPrediction {
        frame_index: f[1]
            .parse()
            .map_err(|_| GroundingError::Unparseable(format!("bad frame {:?}", &f[1])))?,
        u: num(&uv[1])?,
        v: num(&uv[2])?,
        depth: num(&d[1])?,
        size: [num(&s[1])?, num(&s[2])?, num(&s[3])?],
    };
    pred.validate()?;
    Ok(pred)
}

/// World-axis-aligned box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Box3D {
    pub center: Vec3,
    /// `(l, w, h)` along world x, y, z, meters.
    pub size: Vec3,
}

impl Box3D {
    pub fn new(center: Vec3, size: Vec3) -> Result<Self, GroundingError> {
        if size.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(GroundingError::Invalid(format!("box size {size:?} must be positive")));
        }
        Ok(Self { center, size })
    }

    /// The axis-aligned hull of an oriented box.
    pub fn from_obb(obb: &OrientedBox) -> Self {
        let (lo, hi) = obb.aabb();
        Self {
            center: (lo + hi) / 2.0,
            size: hi - lo,
        }
    }

    pub fn min(&self) -> Vec3 {
        self.center - self.size / 2.0
    }

    pub fn max(&self) -> Vec3 {
        self.center + self.size / 2.0
    }

    pub fn volume(&self) -> f64 {
        self.size.x * self.size.y * self.size.z
    }
}

/// Position of a world point in a frame, normalized to 0-1000, with its depth.
pub fn project_normalized(frame: &FrameMeta, world: &Vec3) -> Option<(f64, f64, f64)> {
    let p = frame.pose.inverse_transform_point(world);
    let px = frame.camera.project(&p).ok()?;
    let cam = &frame.camera;
    Some((px.u * 1000.0 / cam.width as f64, px.v * 1000.0 / cam.height as f64, px.z))
}

/// Recovers the world box of a prediction through the frame's camera.
pub fn lift_to_world(pred: &MonoPrediction, frame: &FrameMeta) -> Result<Box3D, GroundingError> {
    if pred.frame_index != frame.frame_index {
        return Err(GroundingError::BadFrame {
            pred: pred.frame_index,
            given: frame.frame_index,
        });
    }
    pred.validate()?;
    let cam = &frame.camera;
    let pixel = Vec3::new(
        pred.u / 1000.0 * cam.width as f64,
        pred.v / 1000.0 * cam.height as f64,
        1.0,
    );
    let k_inv = cam.intrinsics().try_inverse().expect("intrinsics are invertible");
    let ray = k_inv * pixel;
    let center_cam = ray * (pred.depth / ray.z);
    Box3D::new(frame.pose.transform_point(&center_cam), Vec3::from(pred.size))
}

/// Intersection over union of two axis-aligned boxes.
pub fn iou3d(a: &Box3D, b: &Box3D) -> f64 {
    let (amin, amax, bmin, bmax) = (a.min(), a.max(), b.min(), b.max());
    let mut inter = 1.0;
    for i in 0..3 {
        let overlap = amax[i].min(bmax[i]) - amin[i].max(bmin[i]);
        if overlap <= 0.0 {
            return 0.0;
        }
        inter *= overlap;
    }
    let union = a.volume() + b.volume() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Snaps a box to the proposal it overlaps most. Ties, and the case where
/// nothing overlaps, go to the proposal with the nearest center.
pub fn refine_with_proposals(b: &Box3D, proposals: &[Box3D]) -> Box3D {
    if proposals.is_empty() {
        return *b;
    }
    let ious: Vec<f64> = proposals.iter().map(|p| iou3d(b, p)).collect();
    let best = ious.iter().copied().fold(0.0, f64::max);
    let dist = |p: &Box3D| (p.center - b.center).norm();
    proposals
        .iter()
        .zip(&ious)
        .filter(|(_, &iou)| best == 0.0 || iou == best)
        .min_by(|(p, _), (q, _)| dist(p).total_cmp(&dist(q)))
        .map(|(p, _)| *p)
        .expect("non-empty")
}

pub const GROUNDING_THRESHOLDS: [f64; 2] = [0.25, 0.5];

/// One grounding query: the decoded box (if any), the target and the
/// proposals available for refinement.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundingSample {
    pub pred: Option<Box3D>,
    pub gt: Box3D,
    pub proposals: Vec<Box3D>,
}

/// One line of the ground-truth file: the target box, the proposals and the
/// frames a prediction may refer to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRecord {
    pub id: String,
    #[serde(rename = "box")]
    pub gt: Box3D,
    #[serde(default)]
    pub proposals: Vec<Box3D>,
    pub frames: Vec<FrameMeta>,
}

/// A prediction text decoded and lifted against its record; `None` when
/// missing, unparseable or naming an unknown frame.
pub fn lift_prediction(record: &GroundTruthRecord, text: Option<&str>) -> Option<Box3D> {
    let pred = decode_prediction(text?).ok()?;
    let frame = record.frames.iter().find(|f| f.frame_index == pred.frame_index)?;
    lift_to_world(&pred, frame).ok()
}

/// Pairs ground-truth records with prediction texts by id.
pub fn build_samples(
    records: &[GroundTruthRecord],
    predictions: &[(String, String)],
) -> Result<Vec<GroundingSample>, GroundingError> {
    let by_id: BTreeMap<&str, &str> = predictions.iter().map(|(id, t)| (id.as_str(), t.as_str())).collect();
    records
        .iter()
        .map(|r| {
            for b in std::iter::once(&r.gt).chain(&r.proposals) {
                Box3D::new(b.center, b.size).map_err(|e| GroundingError::Invalid(format!("{}: {e}", r.id)))?;
            }
            Ok(GroundingSample {
                pred: lift_prediction(r, by_id.get(r.id.as_str()).copied()),
                gt: r.gt,
                proposals: r.proposals.clone(),
            })
        })
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundingReport {
    pub n: usize,
    pub n_unparseable: usize,
    /// Percent of samples with IoU at or above each threshold.
    pub acc_raw: BTreeMap<String, f64>,
    pub acc_refined: BTreeMap<String, f64>,
}

fn threshold_key(t: f64) -> String {
    format!("acc@{t}")
}

pub fn grounding_accuracy(samples: &[GroundingSample], thresholds: &[f64]) -> GroundingReport {
    let n = samples.len();
    let raw: Vec<f64> = samples
        .iter()
        .map(|s| s.pred.map_or(0.0, |p| iou3d(&p, &s.gt)))
        .collect();
    let refined: Vec<f64> = samples
        .iter()
        .map(|s| s.pred.map_or(0.0, |p| iou3d(&refine_with_proposals(&p, &s.proposals), &s.gt)))
        .collect();
    let acc = |ious: &[f64], t: f64| {
        if n == 0 {
            0.0
        } else {
            100.0 * ious.iter().filter(|&&x| x >= t).count() as f64 / n as f64
        }
    };
    GroundingReport {
        n,
        n_unparseable: samples.iter().filter(|s| s.pred.is_none()).count(),
        acc_raw: thresholds.iter().map(|&t| (threshold_key(t), acc(&raw, t))).collect(),
        acc_refined: thresholds.iter().map(|&t| (threshold_key(t), acc(&refined, t))).collect(),
    }
}
