//! Per-frame object visibility and the cross-view image/object record tables.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::CameraModel;
use crate::geometry::{RigidTransform, Vec3};
use crate::raster::{rasterize_view, RasterResult};
use crate::scene::{FrameIndex, FrameMeta, ObjectAnnotation, ObjectId, SceneBundle, TriangleMesh};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VisibilityConfigError {
    #[error("tau_v must lie in (0, 1], got {0}")]
    TauV(f64),
    #[error("a_min must be positive, got {0}")]
    AreaMin(f64),
    #[error("raster_scale must lie in (0, 1], got {0}")]
    RasterScale(f64),
    #[error("z_max must be positive, got {0}")]
    DepthMax(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VisibilityConfig {
    /// Minimum fraction of visible object vertices (exclusive).
    pub tau_v: f64,
    /// Minimum projected bbox area in full-resolution px².
    pub a_min: f64,
    /// Rasterization resolution relative to the image.
    pub raster_scale: f64,
    /// Farthest admissible object depth, meters.
    pub z_max: f64,
}

impl Default for VisibilityConfig {
    fn default() -> Self {
        Self {
            tau_v: 0.3,
            a_min: 900.0,
            raster_scale: 0.5,
            z_max: 20.0,
        }
    }
}

impl VisibilityConfig {
    pub fn validate(&self) -> Result<(), VisibilityConfigError> {
        if !(self.tau_v > 0.0 && self.tau_v <= 1.0) {
            return Err(VisibilityConfigError::TauV(self.tau_v));
        }
        if !(self.a_min > 0.0) {
            return Err(VisibilityConfigError::AreaMin(self.a_min));
        }
        if !(self.raster_scale > 0.0 && self.raster_scale <= 1.0) {
            return Err(VisibilityConfigError::RasterScale(self.raster_scale));
        }
        if !(self.z_max > 0.0) {
            return Err(VisibilityConfigError::DepthMax(self.z_max));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rejection {
    LowVisibility,
    TooSmall,
    BadDepth,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectInView {
    pub object_id: ObjectId,
    /// `[x_min, y_min, x_max, y_max]` in full-resolution pixels.
    pub bbox2d: [f64; 4],
    pub visible_fraction: f64,
    /// Projection of the box center.
    pub center_2d: [f64; 2],
    pub center_cam: Vec3,
    pub z_range: [f64; 2],
}

impl ObjectInView {
    pub fn bbox_area(&self) -> f64 {
        (self.bbox2d[2] - self.bbox2d[0]) * (self.bbox2d[3] - self.bbox2d[1])
    }

    pub fn bbox_center(&self) -> [f64; 2] {
        [
            (self.bbox2d[0] + self.bbox2d[2]) / 2.0,
            (self.bbox2d[1] + self.bbox2d[3]) / 2.0,
        ]
    }

    pub fn bbox_overlaps(&self, other: &ObjectInView) -> bool {
        let [ax0, ay0, ax1, ay1] = self.bbox2d;
        let [bx0, by0, bx1, by1] = other.bbox2d;
        ax0 < bx1 && bx0 < ax1 && ay0 < by1 && by0 < ay1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub frame_index: FrameIndex,
    pub image_path: String,
    pub camera: CameraModel,
    pub pose: RigidTransform,
    pub resolution: [u32; 2],
    pub visible_objects: Vec<ObjectInView>,
}

impl ImageRecord {
    pub fn object(&self, id: ObjectId) -> Option<&ObjectInView> {
        self.visible_objects.iter().find(|o| o.object_id == id)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectRecord {
    pub object_id: ObjectId,
    pub label: String,
    pub frame_indices: Vec<FrameIndex>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RejectionEntry {
    pub frame_index: FrameIndex,
    pub object_id: ObjectId,
    pub reason: Rejection,
}

/// The `records.json` payload.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Records {
    pub scene_id: String,
    pub images: Vec<ImageRecord>,
    pub objects: Vec<ObjectRecord>,
    #[serde(default)]
    pub rejections: Vec<RejectionEntry>,
}

impl Records {
    pub fn image(&self, frame: FrameIndex) -> Option<&ImageRecord> {
        self.images.iter().find(|r| r.frame_index == frame)
    }

    pub fn object(&self, id: ObjectId) -> Option<&ObjectRecord> {
        self.objects.iter().find(|r| r.object_id == id)
    }
}

/// Vertices touched by at least one face that owns a pixel.
pub struct FrameVisibility {
    visible_vertex: Vec<bool>,
}

impl FrameVisibility {
    pub fn new(raster: &RasterResult, mesh: &TriangleMesh) -> Self {
        let faces = raster.visible_faces(mesh.faces().len());
        let mut visible_vertex = vec![false; mesh.vertices().len()];
        for (face, _) in mesh.faces().iter().zip(&faces).filter(|(_, &v)| v) {
            for &i in face {
                visible_vertex[i as usize] = true;
            }
        }
        Self { visible_vertex }
    }

    pub fn is_visible(&self, vertex: u32) -> bool {
        self.visible_vertex[vertex as usize]
    }
}

/// Rasterizes `mesh` for `frame` at `cfg.raster_scale` of the image size.
pub fn rasterize(frame: &FrameMeta, mesh: &TriangleMesh, cfg: &VisibilityConfig) -> RasterResult {
    rasterize_view(&frame.pose, &frame.camera.scaled(cfg.raster_scale), mesh)
}

/// Projects one object into `frame` and applies the validity constraints.
///
/// Depth validity is judged on visible vertices, or on all of the object's
/// vertices when none is visible, so that objects behind the camera report
/// `BadDepth` rather than `LowVisibility`.
pub fn project_object(
    obj: &ObjectAnnotation,
    frame: &FrameMeta,
    mesh: &TriangleMesh,
    visibility: &FrameVisibility,
    cfg: &VisibilityConfig,
) -> Result<ObjectInView, Rejection> {
    let pose = &frame.pose;
    let camera = &frame.camera;
    let center_cam = pose.inverse_transform_point(&obj.obb.center);
    if center_cam.z <= 0.0 {
        return Err(Rejection::BadDepth);
    }
    let total = obj.vertex_ids.len();
    let visible: Vec<Vec3> = obj
        .vertex_ids
        .iter()
        .filter(|&&v| visibility.is_visible(v))
        .map(|&v| pose.inverse_transform_point(&mesh.vertices()[v as usize]))
        .collect();
    let depth_source: Vec<f64> = if visible.is_empty() {
        obj.vertex_ids
            .iter()
            .map(|&v| pose.inverse_transform_point(&mesh.vertices()[v as usize]).z)
            .collect()
    } else {
        visible.iter().map(|p| p.z).collect()
    };
    let z_min = depth_source.iter().copied().fold(f64::INFINITY, f64::min);
    let z_max = depth_source.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !depth_source.is_empty() && (z_min <= 0.0 || z_max >= cfg.z_max) {
        return Err(Rejection::BadDepth);
    }

    let fraction = if total == 0 {
        0.0
    } else {
        visible.len() as f64 / total as f64
    };
    if fraction <= cfg.tau_v {
        return Err(Rejection::LowVisibility);
    }

    let (w, h) = (camera.width as f64, camera.height as f64);
    let mut bbox = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
    for p in &visible {
        if let Ok(px) = camera.project(p) {
            bbox[0] = bbox[0].min(px.u);
            bbox[1] = bbox[1].min(px.v);
            bbox[2] = bbox[2].max(px.u);
            bbox[3] = bbox[3].max(px.v);
        }
    }
    if !bbox[0].is_finite() {
        return Err(Rejection::BadDepth);
    }
    let bbox2d = [
        bbox[0].clamp(0.0, w),
        bbox[1].clamp(0.0, h),
        bbox[2].clamp(0.0, w),
        bbox[3].clamp(0.0, h),
    ];
    let area = (bbox2d[2] - bbox2d[0]) * (bbox2d[3] - bbox2d[1]);
    if area < cfg.a_min {
        return Err(Rejection::TooSmall);
    }
    let center_px = camera.project(&center_cam).map_err(|_| Rejection::BadDepth)?;
    Ok(ObjectInView {
        object_id: obj.object_id,
        bbox2d,
        visible_fraction: fraction,
        center_2d: [center_px.u, center_px.v],
        center_cam,
        z_range: [z_min, z_max],
    })
}

struct FrameOutcome {
    record: ImageRecord,
    rejections: Vec<RejectionEntry>,
}

fn process_frame(scene: &SceneBundle, frame: &FrameMeta, cfg: &VisibilityConfig) -> FrameOutcome {
    let raster = rasterize(frame, &scene.mesh, cfg);
    let visibility = FrameVisibility::new(&raster, &scene.mesh);
    let mut visible_objects = Vec::new();
    let mut rejections = Vec::new();
    for obj in &scene.objects {
        match project_object(obj, frame, &scene.mesh, &visibility, cfg) {
            Ok(v) => visible_objects.push(v),
            Err(reason) => rejections.push(RejectionEntry {
                frame_index: frame.frame_index,
                object_id: obj.object_id,
                reason,
            }),
        }
    }
    FrameOutcome {
        record: ImageRecord {
            frame_index: frame.frame_index,
            image_path: frame.image_path.clone(),
            camera: frame.camera,
            pose: frame.pose,
            resolution: [frame.camera.width, frame.camera.height],
            visible_objects,
        },
        rejections,
    }
}

/// Builds image and object records for the kept frames. Frames are processed
/// in parallel; results are merged in `kept_frames` order.
pub fn build_records(scene: &SceneBundle, kept_frames: &[FrameIndex], cfg: &VisibilityConfig) -> Records {
    let frames: Vec<&FrameMeta> = kept_frames.iter().filter_map(|&i| scene.frame(i)).collect();
    let outcomes: Vec<FrameOutcome> = frames
        .par_iter()
        .map(|frame| process_frame(scene, frame, cfg))
        .collect();

    let mut by_object: BTreeMap<ObjectId, Vec<FrameIndex>> = BTreeMap::new();
    for out in &outcomes {
        for v in &out.record.visible_objects {
            by_object.entry(v.object_id).or_default().push(out.record.frame_index);
        }
    }
    let objects = scene
        .objects
        .iter()
        .map(|o| {
            let mut frame_indices = by_object.remove(&o.object_id).unwrap_or_default();
            frame_indices.sort_unstable();
            frame_indices.dedup();
            ObjectRecord {
                object_id: o.object_id,
                label: o.label.clone(),
                frame_indices,
            }
        })
        .collect();
    let mut images = Vec::with_capacity(outcomes.len());
    let mut rejections = Vec::new();
    for out in outcomes {
        images.push(out.record);
        rejections.extend(out.rejections);
    }
    Records {
        scene_id: scene.scene_id.clone(),
        images,
        objects,
        rejections,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    use crate::geometry::{OrientedBox, RigidTransform};
    use crate::synthetic::fixture_scene;

    fn camera() -> CameraModel {
        CameraModel::new(250.0, 250.0, 160.0, 120.0, 320, 240).unwrap()
    }

    fn frame(pose: RigidTransform) -> FrameMeta {
        FrameMeta {
            frame_index: 0,
            image_path: "0.png".into(),
            pose,
            camera: camera(),
        }
    }

    /// Axis-aligned cube (object 1) plus optional extra quads, as a scene.
    fn cube_scene(center: Vec3, half: f64, quads: &[[Vec3; 4]]) -> SceneBundle {
        let mut vertices = Vec::new();
        for k in 0..8 {
            let s = |b: usize| if k >> b & 1 == 1 { half } else { -half };
            vertices.push(center + Vec3::new(s(0), s(1), s(2)));
        }
        let quads_idx: [[u32; 4]; 6] = [
            [0, 1, 3, 2],
            [4, 5, 7, 6],
            [0, 1, 5, 4],
            [2, 3, 7, 6],
            [0, 2, 6, 4],
            [1, 3, 7, 5],
        ];
        let mut faces: Vec<[u32; 3]> = quads_idx.iter().flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]]).collect();
        let mut instance = vec![Some(1); 8];
        for q in quads {
            let b = vertices.len() as u32;
            vertices.extend_from_slice(q);
            instance.extend([None; 4]);
            faces.push([b, b + 1, b + 2]);
            faces.push([b, b + 2, b + 3]);
        }
        let mesh = TriangleMesh::new(vertices, faces, instance).unwrap();
        let obj = ObjectAnnotation {
            object_id: 1,
            label: "box".into(),
            obb: OrientedBox::axis_aligned(center, Vec3::repeat(half)),
            vertex_ids: (0..8).collect(),
        };
        SceneBundle::new("cube".into(), mesh, vec![frame(RigidTransform::identity())], vec![obj], Vec3::new(0.0, -1.0, 0.0))
            .unwrap()
    }

    fn project(scene: &SceneBundle, pose: RigidTransform, cfg: &VisibilityConfig) -> Result<ObjectInView, Rejection> {
        let f = frame(pose);
        let raster = rasterize(&f, &scene.mesh, cfg);
        let vis = FrameVisibility::new(&raster, &scene.mesh);
        project_object(&scene.objects[0], &f, &scene.mesh, &vis, cfg)
    }

    #[test]
    fn front_facing_cube_sees_its_front_face() {
        let scene = cube_scene(Vec3::new(0.0, 0.0, 3.0), 0.3, &[]);
        let v = project(&scene, RigidTransform::identity(), &VisibilityConfig::default()).unwrap();
        // only the two front triangles win pixels: 4 of 8 vertices
        assert_eq!(v.visible_fraction, 0.5);
        assert_eq!(v.z_range, [2.7, 2.7]);
        let s = 250.0 * 0.3 / 2.7;
        let expected = [160.0 - s, 120.0 - s, 160.0 + s, 120.0 + s];
        for (a, b) in v.bbox2d.iter().zip(expected) {
            assert!((a - b).abs() < 1e-9);
        }
        assert_eq!(v.center_2d, [160.0, 120.0]);
        let again = project(&scene, RigidTransform::identity(), &VisibilityConfig::default()).unwrap();
        assert_eq!(v, again);
    }

    #[test]
    fn rejections() {
        let cfg = VisibilityConfig::default();
        let wall = [
            Vec3::new(-5.0, -5.0, 1.5),
            Vec3::new(5.0, -5.0, 1.5),
            Vec3::new(5.0, 5.0, 1.5),
            Vec3::new(-5.0, 5.0, 1.5),
        ];
        let hidden = cube_scene(Vec3::new(0.0, 0.0, 3.0), 0.3, &[wall]);
        assert_eq!(project(&hidden, RigidTransform::identity(), &cfg), Err(Rejection::LowVisibility));

        let behind = cube_scene(Vec3::new(0.0, 0.0, -3.0), 0.3, &[]);
        assert_eq!(project(&behind, RigidTransform::identity(), &cfg), Err(Rejection::BadDepth));

        let tiny = cube_scene(Vec3::new(0.0, 0.0, 15.0), 0.3, &[]);
        assert_eq!(project(&tiny, RigidTransform::identity(), &cfg), Err(Rejection::TooSmall));

        let far = cube_scene(Vec3::new(0.0, 0.0, 25.0), 3.0, &[]);
        assert_eq!(project(&far, RigidTransform::identity(), &cfg), Err(Rejection::BadDepth));

        let strict = VisibilityConfig { tau_v: 0.5, ..cfg };
        let open = cube_scene(Vec3::new(0.0, 0.0, 3.0), 0.3, &[]);
        assert_eq!(project(&open, RigidTransform::identity(), &strict), Err(Rejection::LowVisibility));
    }

    #[test]
    fn config_validation() {
        assert!(VisibilityConfig::default().validate().is_ok());
        for bad in [
            VisibilityConfig { tau_v: 0.0, ..Default::default() },
            VisibilityConfig { tau_v: 1.5, ..Default::default() },
            VisibilityConfig { a_min: 0.0, ..Default::default() },
            VisibilityConfig { raster_scale: 0.0, ..Default::default() },
            VisibilityConfig { raster_scale: 1.5, ..Default::default() },
            VisibilityConfig { z_max: -1.0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    /// Straight-line reference: per frame, scan the face map pixel by pixel.
    fn reference(scene: &SceneBundle, cfg: &VisibilityConfig) -> Vec<Vec<(ObjectId, f64)>> {
        scene
            .frames
            .iter()
            .map(|f| {
                let r = rasterize(f, &scene.mesh, cfg);
                let mut seen = vec![false; scene.mesh.vertices().len()];
                for y in 0..r.height() {
                    for x in 0..r.width() {
                        if let Some(face) = r.face_at(x, y) {
                            for &v in &scene.mesh.faces()[face as usize] {
                                seen[v as usize] = true;
                            }
                        }
                    }
                }
                scene
                    .objects
                    .iter()
                    .filter_map(|o| {
                        let n = o.vertex_ids.iter().filter(|&&v| seen[v as usize]).count();
                        let fv = n as f64 / o.vertex_ids.len() as f64;
                        let c = f.pose.inverse_transform_point(&o.obb.center);
                        (fv > cfg.tau_v && c.z > 0.0).then_some((o.object_id, fv))
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn records_agree_with_reference_and_cross_index() {
        let scene = fixture_scene("mini_a").unwrap();
        let cfg = VisibilityConfig::default();
        let all: Vec<FrameIndex> = scene.frames.iter().map(|f| f.frame_index).collect();
        let records = build_records(&scene, &all, &cfg);
        let reference = reference(&scene, &cfg);
        for (img, expected) in records.images.iter().zip(&reference) {
            // the reference skips the area and depth-range checks, so it is a superset
            for v in &img.visible_objects {
                let hit = expected.iter().find(|(id, _)| *id == v.object_id).unwrap();
                assert_eq!(hit.1, v.visible_fraction);
                assert!(v.bbox_area() >= cfg.a_min);
            }
            let rejected: HashSet<ObjectId> = records
                .rejections
                .iter()
                .filter(|r| r.frame_index == img.frame_index)
                .map(|r| r.object_id)
                .collect();
            for (id, _) in expected {
                assert!(img.object(*id).is_some() || rejected.contains(id));
            }
        }
        for o in &records.objects {
            assert!(o.frame_indices.windows(2).all(|w| w[0] < w[1]));
            for img in &records.images {
                assert_eq!(img.object(o.object_id).is_some(), o.frame_indices.contains(&img.frame_index));
            }
        }
        assert_eq!(records.objects.len(), scene.objects.len());
        assert!(records.objects.iter().all(|o| !o.frame_indices.is_empty()));
    }

    #[test]
    fn unseen_object_keeps_an_empty_record() {
        let scene = cube_scene(Vec3::new(0.0, 0.0, -3.0), 0.3, &[]);
        let records = build_records(&scene, &[0], &VisibilityConfig::default());
        assert_eq!(records.objects.len(), 1);
        assert!(records.objects[0].frame_indices.is_empty());
        assert_eq!(records.rejections.len(), 1);
    }

    #[test]
    fn raster_scale_barely_moves_visibility() {
        let scene = fixture_scene("mini_b").unwrap();
        let all: Vec<FrameIndex> = scene.frames.iter().map(|f| f.frame_index).collect();
        let full = build_records(&scene, &all, &VisibilityConfig { raster_scale: 1.0, ..Default::default() });
        let half = build_records(&scene, &all, &VisibilityConfig::default());
        let mut compared = 0;
        for (a, b) in full.images.iter().zip(&half.images) {
            for v in &a.visible_objects {
                if let Some(w) = b.object(v.object_id) {
                    assert!((v.visible_fraction - w.visible_fraction).abs() <= 0.1);
                    compared += 1;
                }
            }
        }
        assert!(compared > 20);
    }
}
