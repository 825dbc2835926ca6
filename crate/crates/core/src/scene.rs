//! Scene bundles and the on-disk scene manifest.
//!
//! A scene directory holds `scene.json` (frames), `mesh.ply` (ASCII mesh with a
//! per-vertex `instance_id`) and `objects.json` (oriented boxes).

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::CameraModel;
use crate::geometry::{is_finite, mat3_rows, OrientedBox, RigidTransform, Vec3};
use crate::ply;

pub type ObjectId = u32;
pub type FrameIndex = u32;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed {file}: {message}")]
    Parse { file: String, message: String },
    #[error("invalid scene: {0}")]
    Validation(String),
}

fn invalid(msg: impl Into<String>) -> SceneError {
    SceneError::Validation(msg.into())
}

#[derive(Clone, Debug, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[u32; 3]>,
    vertex_instance: Vec<Option<ObjectId>>,
}

impl TriangleMesh {
    pub fn new(
        vertices: Vec<Vec3>,
        faces: Vec<[u32; 3]>,
        vertex_instance: Vec<Option<ObjectId>>,
    ) -> Result<Self, SceneError> {
        if vertex_instance.len() != vertices.len() {
            return Err(invalid(format!(
                "mesh has {} vertices but {} instance labels",
                vertices.len(),
                vertex_instance.len()
            )));
        }
        if let Some(i) = vertices.iter().position(|v| !is_finite(v)) {
            return Err(invalid(format!("mesh vertex {i} is not finite")));
        }
        let n = vertices.len() as u32;
        for (k, f) in faces.iter().enumerate() {
            if f.iter().any(|&i| i >= n) {
                return Err(invalid(format!("face {k} references a vertex out of range")));
            }
            if f[0] == f[1] && f[1] == f[2] {
                return Err(invalid(format!("face {k} is degenerate")));
            }
        }
        Ok(Self {
            vertices,
            faces,
            vertex_instance,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn vertex_instance(&self) -> &[Option<ObjectId>] {
        &self.vertex_instance
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    /// Vertex indices labeled with `id`.
    pub fn instance_vertices(&self, id: ObjectId) -> Vec<u32> {
        self.vertex_instance
            .iter()
            .enumerate()
            .filter(|(_, inst)| **inst == Some(id))
            .map(|(i, _)| i as u32)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectAnnotation {
    pub object_id: ObjectId,
    pub label: String,
    #[serde(rename = "box")]
    pub obb: OrientedBox,
    pub vertex_ids: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameMeta {
    pub frame_index: FrameIndex,
    pub image_path: String,
    /// Camera-to-world.
    pub pose: RigidTransform,
    pub camera: CameraModel,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneBundle {
    pub scene_id: String,
    pub mesh: TriangleMesh,
    pub frames: Vec<FrameMeta>,
    pub objects: Vec<ObjectAnnotation>,
    pub up_axis: Vec3,
}

impl SceneBundle {
    /// Checks the cross-field invariants; sorts frames by index.
    pub fn new(
        scene_id: String,
        mesh: TriangleMesh,
        mut frames: Vec<FrameMeta>,
        objects: Vec<ObjectAnnotation>,
        up_axis: Vec3,
    ) -> Result<Self, SceneError> {
        if scene_id.trim().is_empty() {
            return Err(invalid("scene_id is empty"));
        }
        if !is_finite(&up_axis) || (up_axis.norm() - 1.0).abs() > 1e-6 {
            return Err(invalid("up_axis must be a unit vector"));
        }
        frames.sort_by_key(|f| f.frame_index);
        if let Some(w) = frames.windows(2).find(|w| w[0].frame_index == w[1].frame_index) {
            return Err(invalid(format!("duplicate frame index {}", w[0].frame_index)));
        }
        let mut seen = HashSet::new();
        for o in &objects {
            if !seen.insert(o.object_id) {
                return Err(invalid(format!("duplicate object id {}", o.object_id)));
            }
            if o.label.trim().is_empty() {
                return Err(invalid(format!("object {} has an empty label", o.object_id)));
            }
            if o.obb.half_extents.iter().any(|&h| !(h > 0.0)) {
                return Err(invalid(format!("object {} has non-positive extents", o.object_id)));
            }
            if let Some(&v) = o.vertex_ids.iter().find(|&&v| v as usize >= mesh.vertices.len()) {
                return Err(invalid(format!("object {} references vertex {v}", o.object_id)));
            }
        }
        Ok(Self {
            scene_id,
            mesh,
            frames,
            objects,
            up_axis,
        })
    }

    pub fn frame(&self, index: FrameIndex) -> Option<&FrameMeta> {
        self.frames
            .binary_search_by_key(&index, |f| f.frame_index)
            .ok()
            .map(|i| &self.frames[i])
    }

    pub fn object(&self, id: ObjectId) -> Option<&ObjectAnnotation> {
        self.objects.iter().find(|o| o.object_id == id)
    }
}

/// How the poses in `scene.json` are stored for a given source dataset.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoseConvention {
    #[default]
    CameraToWorld,
    WorldToCamera,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct LoadOptions {
    pub pose_convention: PoseConvention,
}

#[derive(Serialize, Deserialize)]
struct ManifestFrame {
    index: FrameIndex,
    image: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pose: Option<[[f64; 4]; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    intrinsics: Option<[[f64; 3]; 3]>,
    width: u32,
    height: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestScene {
    scene_id: String,
    #[serde(default = "default_up")]
    up_axis: [f64; 3],
    frames: Vec<ManifestFrame>,
}

fn default_up() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestObject {
    id: ObjectId,
    label: String,
    center: [f64; 3],
    half_extents: [f64; 3],
    rotation: [[f64; 3]; 3],
}

fn read(path: &Path) -> Result<String, SceneError> {
    fs::read_to_string(path).map_err(|source| SceneError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, SceneError> {
    serde_json::from_str(&read(path)?).map_err(|e| SceneError::Parse {
        file: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Loads and validates one scene directory.
pub fn load_scene_manifest(dir: &Path, opts: LoadOptions) -> Result<SceneBundle, SceneError> {
    let scene: ManifestScene = parse_json(&dir.join("scene.json"))?;
    let objects: Vec<ManifestObject> = parse_json(&dir.join("objects.json"))?;
    let ply_path = dir.join("mesh.ply");
    let raw = ply::parse(&read(&ply_path)?).map_err(|message| SceneError::Parse {
        file: ply_path.display().to_string(),
        message,
    })?;

    let instance = raw
        .instance_ids
        .iter()
        .map(|&id| u32::try_from(id).ok())
        .collect();
    let mesh = TriangleMesh::new(raw.vertices, raw.faces, instance)?;

    let mut frames = Vec::with_capacity(scene.frames.len());
    for f in scene.frames {
        let rows = f
            .pose
            .ok_or_else(|| invalid(format!("frame {}: missing pose", f.index)))?;
        let k = f
            .intrinsics
            .ok_or_else(|| invalid(format!("frame {}: missing intrinsics", f.index)))?;
        let m = nalgebra::Matrix4::from_fn(|i, j| rows[i][j]);
        let last = m.row(3);
        if (last[0].abs() + last[1].abs() + last[2].abs() + (last[3] - 1.0).abs()) > 1e-9 {
            return Err(invalid(format!("frame {}: pose is not a rigid 4x4", f.index)));
        }
        let pose = RigidTransform::new_orthonormalized(
            m.fixed_view::<3, 3>(0, 0).into_owned(),
            m.fixed_view::<3, 1>(0, 3).into_owned(),
        )
        .map_err(|e| invalid(format!("frame {}: {e}", f.index)))?;
        let pose = match opts.pose_convention {
            PoseConvention::CameraToWorld => pose,
            PoseConvention::WorldToCamera => pose.inverse(),
        };
        let camera = CameraModel::from_intrinsics(&mat3_rows::from_rows(&k), f.width, f.height)
            .map_err(|e| invalid(format!("frame {}: {e}", f.index)))?;
        frames.push(FrameMeta {
            frame_index: f.index,
            image_path: f.image,
            pose,
            camera,
        });
    }

    let mut annotations = Vec::with_capacity(objects.len());
    for o in objects {
        let obb = OrientedBox::new(
            Vec3::from(o.center),
            Vec3::from(o.half_extents),
            mat3_rows::from_rows(&o.rotation),
        )
        .map_err(|e| invalid(format!("object {}: {e}", o.id)))?;
        annotations.push(ObjectAnnotation {
            object_id: o.id,
            vertex_ids: mesh.instance_vertices(o.id),
            label: o.label,
            obb,
        });
    }

    SceneBundle::new(
        scene.scene_id,
        mesh,
        frames,
        annotations,
        Vec3::from(scene.up_axis),
    )
}

/// Writes `scene` as a manifest directory (poses camera-to-world).
pub fn write_scene_manifest(scene: &SceneBundle, dir: &Path) -> Result<(), SceneError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| SceneError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let manifest = ManifestScene {
        scene_id: scene.scene_id.clone(),
        up_axis: scene.up_axis.into(),
        frames: scene
            .frames
            .iter()
            .map(|f| ManifestFrame {
                index: f.frame_index,
                image: f.image_path.clone(),
                pose: Some(f.pose.to_rows()),
                intrinsics: Some(mat3_rows::to_rows(&f.camera.intrinsics())),
                width: f.camera.width,
                height: f.camera.height,
            })
            .collect(),
    };
    let objects: Vec<ManifestObject> = scene
        .objects
        .iter()
        .map(|o| ManifestObject {
            id: o.object_id,
            label: o.label.clone(),
            center: o.obb.center.into(),
            half_extents: o.obb.half_extents.into(),
            rotation: mat3_rows::to_rows(&o.obb.rotation),
        })
        .collect();
    let mesh = ply::PlyMesh {
        vertices: scene.mesh.vertices.clone(),
        instance_ids: scene
            .mesh
            .vertex_instance
            .iter()
            .map(|i| i.map_or(-1, |v| v as i32))
            .collect(),
        faces: scene.mesh.faces.clone(),
    };
    let files = [
        ("scene.json", serde_json::to_string_pretty(&manifest).expect("serializable")),
        ("objects.json", serde_json::to_string_pretty(&objects).expect("serializable")),
        ("mesh.ply", ply::write(&mesh)),
    ];
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body).map_err(io(&path))?;
    }
    Ok(())
}
