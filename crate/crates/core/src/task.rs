//! Geometric ground truth for the individual task families.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::CameraModel;
use crate::geometry::{Mat3, OrientedBox, RigidTransform, Vec3};
use crate::scene::{FrameIndex, ObjectId};
use crate::visibility::{ObjectRecord, Records};

/// Rounding granularity of view-change rotations, degrees.
pub const ROTATION_STEP_DEG: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    Overlap,
    TooClose,
    Ambiguous,
    SingleView,
    TooSmall,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    DegenerateGaze,
    ExcessiveTilt,
    OutOfView,
    BehindCamera,
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum TaskError {
    #[error("point lies behind the camera")]
    BehindCamera,
    #[error("skipped: {0:?}")]
    Skipped(SkipReason),
    #[error("rejected: {0:?}")]
    Rejected(RejectReason),
    #[error("degenerate geometry")]
    DegenerateGeometry,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RelationConfig {
    /// Differences below this many meters count as indistinguishable.
    pub indist_threshold: f64,
    /// Metric answers are rounded to multiples of this, meters.
    pub round_step: f64,
    /// Degrees.
    pub lookat_max_tilt: f64,
}

impl Default for RelationConfig {
    fn default() -> Self {
        Self {
            indist_threshold: 0.1,
            round_step: 0.1,
            lookat_max_tilt: 60.0,
        }
    }
}

impl RelationConfig {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("indist_threshold", self.indist_threshold),
            ("round_step", self.round_step),
            ("lookat_max_tilt", self.lookat_max_tilt),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        Ok(())
    }
}

/// Rounds to the nearest multiple of `step`, keeping decimal steps exact
/// (`round_to(1.234, 0.1) == 1.2`).
pub fn round_to(x: f64, step: f64) -> f64 {
    if step >= 1.0 {
        (x / step).round() * step
    } else {
        let inv = (1.0 / step).round();
        (x * inv).round() / inv
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeftRight {
    Left,
    Right,
    #[default]
    None,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AboveBelow {
    Above,
    Below,
    #[default]
    None,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NearFar {
    Near,
    Far,
    #[default]
    None,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrontBehind {
    Front,
    Behind,
    #[default]
    None,
}

macro_rules! relation_word {
    ($t:ty, $a:ident => $wa:literal, $b:ident => $wb:literal) => {
        impl $t {
            /// The answer word, empty when indistinguishable.
            pub fn word(self) -> &'static str {
                match self {
                    Self::$a => $wa,
                    Self::$b => $wb,
                    Self::None => "",
                }
            }

            pub fn flipped(self) -> Self {
                match self {
                    Self::$a => Self::$b,
                    Self::$b => Self::$a,
                    Self::None => Self::None,
                }
            }

            fn from_delta(delta: f64, threshold: f64) -> Self {
                if delta.abs() < threshold {
                    Self::None
                } else if delta < 0.0 {
                    Self::$a
                } else {
                    Self::$b
                }
            }
        }

        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.word())
            }
        }
    };
}

relation_word!(LeftRight, Left => "left", Right => "right");
relation_word!(AboveBelow, Above => "above", Below => "below");
relation_word!(NearFar, Near => "near", Far => "far");
relation_word!(FrontBehind, Behind => "behind", Front => "front");

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpatialRelation {
    pub left_right: LeftRight,
    pub above_below: AboveBelow,
    pub near_far: NearFar,
    pub front_behind: FrontBehind,
}

impl SpatialRelation {
    /// The relation seen from the other object.
    pub fn flipped(&self) -> Self {
        Self {
            left_right: self.left_right.flipped(),
            above_below: self.above_below.flipped(),
            near_far: self.near_far.flipped(),
            front_behind: self.front_behind.flipped(),
        }
    }

    /// Number of axes with a definite answer.
    pub fn definite_axes(&self) -> usize {
        [
            self.left_right != LeftRight::None,
            self.above_below != AboveBelow::None,
            self.near_far != NearFar::None,
            self.front_behind != FrontBehind::None,
        ]
        .iter()
        .filter(|&&b| b)
        .count()
    }
}

/// Relation of `a` with respect to `b` (or to the observer at the origin when
/// `b` is `None`). Both points are in the same camera frame.
pub fn spatial_relation(a: &Vec3, b: Option<&Vec3>, cfg: &RelationConfig) -> SpatialRelation {
    let th = cfg.indist_threshold;
    let reference = b.copied().unwrap_or_else(Vec3::zeros);
    let d = a - reference;
    let near_far = match b {
        Some(b) => NearFar::from_delta(a.norm() - b.norm(), th),
        None => NearFar::None,
    };
    SpatialRelation {
        left_right: LeftRight::from_delta(d.x, th),
        above_below: AboveBelow::from_delta(d.y, th),
        near_far,
        front_behind: FrontBehind::from_delta(d.z, th),
    }
}

/// Depth of a camera-frame point, rounded.
pub fn depth_of(center_cam: &Vec3, cfg: &RelationConfig) -> Result<f64, TaskError> {
    if center_cam.z <= 0.0 {
        return Err(TaskError::BehindCamera);
    }
    Ok(round_to(center_cam.z, cfg.round_step))
}

pub fn relative_depth(d_i: f64, d_j: f64) -> f64 {
    (d_i - d_j).abs()
}

/// Distance from the camera to a camera-frame point, rounded.
pub fn distance_oc(center_cam: &Vec3, cfg: &RelationConfig) -> f64 {
    round_to(center_cam.norm(), cfg.round_step)
}

/// An object center (camera frame) with its world-frame box.
#[derive(Clone, Copy, Debug)]
pub struct PlacedObject<'a> {
    pub center: Vec3,
    pub obb: &'a OrientedBox,
}

/// Unrounded center distance, checking the skip rules.
fn checked_distance(a: &PlacedObject, b: &PlacedObject, cfg: &RelationConfig) -> Result<f64, TaskError> {
    if a.obb.intersects(b.obb) {
        return Err(TaskError::Skipped(SkipReason::Overlap));
    }
    let d = (a.center - b.center).norm();
    if d < cfg.indist_threshold {
        return Err(TaskError::Skipped(SkipReason::TooClose));
    }
    Ok(d)
}

/// Center-to-center distance of two objects, rounded.
pub fn distance_oo(a: &PlacedObject, b: &PlacedObject, cfg: &RelationConfig) -> Result<f64, TaskError> {
    checked_distance(a, b, cfg).map(|d| round_to(d, cfg.round_step))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pick {
    B,
    C,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NearerOf {
    pub nearer: Pick,
    /// Rounded distances from the anchor.
    pub d_b: f64,
    pub d_c: f64,
}

impl NearerOf {
    pub fn farther(&self) -> Pick {
        match self.nearer {
            Pick::B => Pick::C,
            Pick::C => Pick::B,
        }
    }
}

/// Which of `b` and `c` lies closer to `anchor`.
pub fn nearer_of(
    anchor: &PlacedObject,
    b: &PlacedObject,
    c: &PlacedObject,
    cfg: &RelationConfig,
) -> Result<NearerOf, TaskError> {
    if b.obb.intersects(c.obb) {
        return Err(TaskError::Skipped(SkipReason::Overlap));
    }
    let d_b = checked_distance(anchor, b, cfg)?;
    let d_c = checked_distance(anchor, c, cfg)?;
    if (d_b - d_c).abs() < cfg.indist_threshold {
        return Err(TaskError::Skipped(SkipReason::Ambiguous));
    }
    Ok(NearerOf {
        nearer: if d_b < d_c { Pick::B } else { Pick::C },
        d_b: round_to(d_b, cfg.round_step),
        d_c: round_to(d_c, cfg.round_step),
    })
}

/// Camera-to-world pose placed at `c_a` and facing `c_b`.
///
/// The rotation columns are right, down and forward, matching the camera
/// convention used everywhere else (the up vector enters negated).
pub fn lookat_pose(c_a: &Vec3, c_b: &Vec3, up: &Vec3, cfg: &RelationConfig) -> Result<RigidTransform, TaskError> {
    let gaze = c_b - c_a;
    if gaze.norm() < 1e-9 {
        return Err(TaskError::Rejected(RejectReason::DegenerateGaze));
    }
    let f = gaze.normalize();
    let up = up.normalize();
    let left = up.cross(&f);
    if left.norm() < 1e-6 {
        return Err(TaskError::Rejected(RejectReason::DegenerateGaze));
    }
    let v = left.normalize();
    let u = f.cross(&v);
    let r = -v;
    let tilt = u.dot(&up).clamp(-1.0, 1.0).acos().to_degrees();
    if tilt > cfg.lookat_max_tilt {
        return Err(TaskError::Rejected(RejectReason::ExcessiveTilt));
    }
    let rotation = Mat3::from_columns(&[r, -u, f]);
    Ok(RigidTransform::new(rotation, *c_a).expect("look-at basis is a proper rotation"))
}

/// Relation of `target` to `reference` (an object, or the observer when
/// `None`) before and after moving the observer to `c_a` facing `c_b`.
/// All inputs in world coordinates.
pub fn imagined_relation(
    c_a: &Vec3,
    c_b: &Vec3,
    target: &Vec3,
    reference: Option<&Vec3>,
    main_pose: &RigidTransform,
    up: &Vec3,
    cfg: &RelationConfig,
) -> Result<(SpatialRelation, SpatialRelation), TaskError> {
    let moved = lookat_pose(c_a, c_b, up, cfg)?;
    let relate = |pose: &RigidTransform| {
        let t = pose.inverse_transform_point(target);
        let r = reference.map(|p| pose.inverse_transform_point(p));
        spatial_relation(&t, r.as_ref(), cfg)
    };
    Ok((relate(main_pose), relate(&moved)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectDims {
    /// Centimeters.
    pub height: f64,
    pub length: f64,
    pub width: f64,
    /// Cubic centimeters.
    pub volume: f64,
}

/// Height, length and width of a box from its corners in world coordinates
/// (z up). Length and width are the largest and smallest pairwise distances
/// between the distinct xy projections of the corners.
pub fn object_dims(obb: &OrientedBox) -> ObjectDims {
    let corners = obb.corners();
    let z_min = corners.iter().map(|c| c.z).fold(f64::INFINITY, f64::min);
    let z_max = corners.iter().map(|c| c.z).fold(f64::NEG_INFINITY, f64::max);
    let mut xy: Vec<[f64; 2]> = Vec::with_capacity(8);
    for c in &corners {
        let p = [c.x, c.y];
        if !xy.iter().any(|q| (q[0] - p[0]).hypot(q[1] - p[1]) < 1e-6) {
            xy.push(p);
        }
    }
    let mut l = 0.0f64;
    let mut w = f64::INFINITY;
    for i in 0..xy.len() {
        for j in i + 1..xy.len() {
            let d = (xy[i][0] - xy[j][0]).hypot(xy[i][1] - xy[j][1]);
            l = l.max(d);
            w = w.min(d);
        }
    }
    if !w.is_finite() {
        w = 0.0;
    }
    let (h, l, w) = ((z_max - z_min) * 100.0, l * 100.0, w * 100.0);
    ObjectDims {
        height: h,
        length: l,
        width: w,
        volume: h * l * w,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositionMatch {
    pub object_id: ObjectId,
    pub frame_a: FrameIndex,
    pub frame_b: FrameIndex,
    pub bbox_a: [f64; 4],
    pub bbox_b: [f64; 4],
}

/// Picks two distinct positions out of `n` (`n >= 2`): a uniform first pick,
/// then a uniform pick among the remaining ones.
pub fn sample_pair<R: Rng + ?Sized>(rng: &mut R, n: usize) -> (usize, usize) {
    let i = rng.gen_range(0..n);
    let mut j = rng.gen_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    (i, j)
}

/// Reference and target frames for locating `obj` across two views.
pub fn position_match_sample<R: Rng + ?Sized>(
    obj: &ObjectRecord,
    records: &Records,
    rng: &mut R,
) -> Result<PositionMatch, TaskError> {
    if obj.frame_indices.len() < 2 {
        return Err(TaskError::Skipped(SkipReason::SingleView));
    }
    let (i, j) = sample_pair(rng, obj.frame_indices.len());
    let (fa, fb) = (obj.frame_indices[i], obj.frame_indices[j]);
    let bbox = |f: FrameIndex| {
        records
            .image(f)
            .and_then(|r| r.object(obj.object_id))
            .map(|o| o.bbox2d)
            .ok_or(TaskError::Skipped(SkipReason::SingleView))
    };
    Ok(PositionMatch {
        object_id: obj.object_id,
        frame_a: fa,
        frame_b: fb,
        bbox_a: bbox(fa)?,
        bbox_b: bbox(fb)?,
    })
}

/// Camera motion from view A to view B, in A's axes. Positive values mean
/// right, down, forward; rotations are the yaw (right) and pitch (down) of
/// B's viewing direction seen from A.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MotionDescriptor {
    pub move_right: f64,
    pub move_down: f64,
    pub move_forward: f64,
    pub rotate_down: f64,
    pub rotate_right: f64,
}

impl MotionDescriptor {
    pub fn as_array(&self) -> [f64; 5] {
        [
            self.move_right,
            self.move_down,
            self.move_forward,
            self.rotate_down,
            self.rotate_right,
        ]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self {
            move_right: a[0],
            move_down: a[1],
            move_forward: a[2],
            rotate_down: a[3],
            rotate_right: a[4],
        }
    }
}

pub fn view_change(t_a: &RigidTransform, t_b: &RigidTransform, cfg: &RelationConfig) -> MotionDescriptor {
    let rel = t_a.inverse().compose(t_b);
    let t = rel.translation();
    let f = rel.rotation() * Vec3::z();
    let yaw = f.x.atan2(f.z).to_degrees();
    let pitch = f.y.atan2(f.x.hypot(f.z)).to_degrees();
    let m = |x: f64| round_to(x, cfg.round_step) + 0.0;
    let deg = |x: f64| round_to(x, ROTATION_STEP_DEG) + 0.0;
    MotionDescriptor {
        move_right: m(t.x),
        move_down: m(t.y),
        move_forward: m(t.z),
        rotate_down: deg(pitch),
        rotate_right: deg(yaw),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraPosition {
    /// Image position normalized to [0, 1000].
    pub u: f64,
    pub v: f64,
    /// Meters.
    pub depth: f64,
}

/// Minimum depth of camera B in A's frame, meters.
pub const MIN_CAMERA_DEPTH: f64 = 0.1;

/// Where camera B's center appears in image A.
pub fn camera_pose_projection(
    pose_a: &RigidTransform,
    camera_a: &CameraModel,
    pose_b: &RigidTransform,
) -> Result<CameraPosition, TaskError> {
    let p = pose_a.inverse_transform_point(pose_b.translation());
    if p.z <= MIN_CAMERA_DEPTH {
        return Err(TaskError::Rejected(RejectReason::BehindCamera));
    }
    let px = camera_a
        .project(&p)
        .map_err(|_| TaskError::Rejected(RejectReason::BehindCamera))?;
    let u = px.u * 1000.0 / camera_a.width as f64;
    let v = px.v * 1000.0 / camera_a.height as f64;
    if !(0.0..=1000.0).contains(&u) || !(0.0..=1000.0).contains(&v) {
        return Err(TaskError::Rejected(RejectReason::OutOfView));
    }
    Ok(CameraPosition { u, v, depth: p.z })
}

/// Objects ordered by the first frame they appear in (ties by id). Objects
/// never seen are left out.
pub fn appearance_order(objects: &[ObjectRecord]) -> Vec<(ObjectId, FrameIndex)> {
    let mut order: Vec<(ObjectId, FrameIndex)> = objects
        .iter()
        .filter_map(|o| o.frame_indices.iter().min().map(|&f| (o.object_id, f)))
        .collect();
    order.sort_by_key(|&(id, f)| (f, id));
    order
}

/// Instance count per label, keeping labels with at least two instances.
pub fn object_count<S: AsRef<str>>(labels: &[S]) -> BTreeMap<String, usize> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l.as_ref().to_string()).or_default() += 1;
    }
    counts.retain(|_, n| *n >= 2);
    counts
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoomAreaConfig {
    /// Voxel size, meters.
    pub delta: f64,
    pub alpha: f64,
    /// Minimum area, m².
    pub a_th: f64,
}

impl Default for RoomAreaConfig {
    fn default() -> Self {
        Self {
            delta: 0.1,
            alpha: 0.1,
            a_th: 5.0,
        }
    }
}

impl RoomAreaConfig {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [("delta", self.delta), ("alpha", self.alpha)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.a_th >= 0.0) {
            return Err(format!("a_th must be non-negative, got {}", self.a_th));
        }
        Ok(())
    }
}

/// Centers of the occupied voxels of size `delta`, in first-seen order.
pub fn voxel_downsample(points: &[Vec3], delta: f64) -> Vec<Vec3> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for p in points {
        let q = [
            (p.x / delta).floor() as i64,
            (p.y / delta).floor() as i64,
            (p.z / delta).floor() as i64,
        ];
        if seen.insert(q) {
            out.push(Vec3::new(
                (q[0] as f64 + 0.5) * delta,
                (q[1] as f64 + 0.5) * delta,
                (q[2] as f64 + 0.5) * delta,
            ));
        }
    }
    out
}

fn triangle_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])).abs() / 2.0
}

fn circumradius(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    let ab = (a[0] - b[0]).hypot(a[1] - b[1]);
    let bc = (b[0] - c[0]).hypot(b[1] - c[1]);
    let ca = (c[0] - a[0]).hypot(c[1] - a[1]);
    let area = triangle_area(a, b, c);
    if area == 0.0 {
        f64::INFINITY
    } else {
        ab * bc * ca / (4.0 * area)
    }
}

/// Area of the alpha shape of the xy projection: Delaunay triangles whose
/// circumradius is at most `1/alpha`, falling back to the convex hull when
/// none qualifies.
pub fn alpha_shape_area(xy: &[[f64; 2]], alpha: f64) -> Result<f64, TaskError> {
    let pts: Vec<delaunator::Point> = xy.iter().map(|p| delaunator::Point { x: p[0], y: p[1] }).collect();
    let tri = delaunator::triangulate(&pts);
    if tri.triangles.is_empty() {
        return Err(TaskError::DegenerateGeometry);
    }
    let r_max = 1.0 / alpha;
    let mut area = 0.0;
    let mut kept = 0usize;
    for t in tri.triangles.chunks_exact(3) {
        let (a, b, c) = (xy[t[0]], xy[t[1]], xy[t[2]]);
        if circumradius(a, b, c) <= r_max {
            area += triangle_area(a, b, c);
            kept += 1;
        }
    }
    if kept == 0 {
        let hull: Vec<[f64; 2]> = tri.hull.iter().map(|&i| xy[i]).collect();
        area = shoelace(&hull);
    }
    Ok(area)
}

/// Absolute area of a simple polygon.
pub fn shoelace(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    let mut s = 0.0;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        s += a[0] * b[1] - b[0] * a[1];
    }
    s.abs() / 2.0
}

/// Floor area of a room from its mesh vertices, m².
pub fn room_area(vertices: &[Vec3], cfg: &RoomAreaConfig) -> Result<f64, TaskError> {
    if vertices.is_empty() {
        return Err(TaskError::DegenerateGeometry);
    }
    let down = voxel_downsample(vertices, cfg.delta);
    let pts = if down.len() < 100 { vertices } else { &down[..] };
    let xy: Vec<[f64; 2]> = pts.iter().map(|p| [p.x, p.y]).collect();
    let area = alpha_shape_area(&xy, cfg.alpha)?;
    if area < cfg.a_th {
        return Err(TaskError::Skipped(SkipReason::TooSmall));
    }
    Ok(area)
}
