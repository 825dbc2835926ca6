//! Procedural indoor scenes: a floor, four walls, box-shaped furniture and a
//! camera trajectory. Used for the bundled fixtures and for randomized tests.

use rand::Rng;

use crate::camera::CameraModel;
use crate::geometry::{axis_angle_deg, OrientedBox, RigidTransform, Vec3};
use crate::scene::{FrameMeta, ObjectAnnotation, ObjectId, SceneBundle, TriangleMesh};

pub const LABELS: &[&str] = &[
    "bed", "chair", "table", "lamp", "heater", "sofa", "desk", "cabinet", "bookshelf",
    "trash can", "refrigerator", "wardrobe", "backpack", "box", "monitor", "plant",
    "suitcase", "nightstand", "armchair", "dresser",
];

#[derive(Clone, Debug)]
pub struct SynthObject {
    pub label: String,
    pub center: Vec3,
    pub half_extents: Vec3,
    pub yaw_deg: f64,
}

#[derive(Clone, Debug)]
pub struct RoomLayout {
    /// Floor spans `[0, size[0]] × [0, size[1]]` at z = 0.
    pub size: [f64; 2],
    pub wall_height: f64,
    pub grid_step: f64,
    pub objects: Vec<SynthObject>,
}

/// Camera-to-world pose at `eye` looking at `target` (x-right, y-down, z-forward).
pub fn look_at(eye: Vec3, target: Vec3, up: Vec3) -> RigidTransform {
    let f = (target - eye).normalize();
    let x = f.cross(&up).normalize();
    let y = f.cross(&x);
    let r = crate::geometry::Mat3::from_columns(&[x, y, f]);
    RigidTransform::new(r, eye).expect("look_at builds a proper rotation")
}

pub fn default_camera() -> CameraModel {
    CameraModel::new(250.0, 250.0, 160.0, 120.0, 320, 240).expect("valid camera")
}

#[derive(Default)]
struct MeshBuilder {
    vertices: Vec<Vec3>,
    faces: Vec<[u32; 3]>,
    instance: Vec<Option<ObjectId>>,
}

impl MeshBuilder {
    /// Regular grid spanning `origin + s·u + t·v`, s, t ∈ [0, 1].
    fn grid(&mut self, origin: Vec3, u: Vec3, v: Vec3, step: f64) {
        let nu = ((u.norm() / step).ceil() as u32).max(1);
        let nv = ((v.norm() / step).ceil() as u32).max(1);
        let base = self.vertices.len() as u32;
        for j in 0..=nv {
            for i in 0..=nu {
                let p = origin + u * (i as f64 / nu as f64) + v * (j as f64 / nv as f64);
                self.vertices.push(p);
                self.instance.push(None);
            }
        }
        let idx = |i: u32, j: u32| base + j * (nu + 1) + i;
        for j in 0..nv {
            for i in 0..nu {
                self.faces.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
                self.faces.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
            }
        }
    }

    fn cuboid(&mut self, obb: &OrientedBox, id: ObjectId) {
        let base = self.vertices.len() as u32;
        for c in obb.corners() {
            self.vertices.push(c);
            self.instance.push(Some(id));
        }
        // corner index bits: x = bit 0, y = bit 1, z = bit 2
        const QUADS: [[u32; 4]; 6] = [
            [0, 2, 6, 4],
            [1, 5, 7, 3],
            [0, 4, 5, 1],
            [2, 3, 7, 6],
            [0, 1, 3, 2],
            [4, 6, 7, 5],
        ];
        for q in QUADS {
            self.faces.push([base + q[0], base + q[1], base + q[2]]);
            self.faces.push([base + q[0], base + q[2], base + q[3]]);
        }
    }
}

/// Builds a scene from a layout and camera poses. Object ids start at 1.
pub fn room_scene(scene_id: &str, layout: &RoomLayout, poses: &[RigidTransform], camera: CameraModel) -> SceneBundle {
    let mut mb = MeshBuilder::default();
    let [sx, sy] = layout.size;
    let h = layout.wall_height;
    let step = layout.grid_step;
    mb.grid(Vec3::zeros(), Vec3::new(sx, 0.0, 0.0), Vec3::new(0.0, sy, 0.0), step);
    mb.grid(Vec3::zeros(), Vec3::new(sx, 0.0, 0.0), Vec3::new(0.0, 0.0, h), step * 2.0);
    mb.grid(Vec3::new(0.0, sy, 0.0), Vec3::new(sx, 0.0, 0.0), Vec3::new(0.0, 0.0, h), step * 2.0);
    mb.grid(Vec3::zeros(), Vec3::new(0.0, sy, 0.0), Vec3::new(0.0, 0.0, h), step * 2.0);
    mb.grid(Vec3::new(sx, 0.0, 0.0), Vec3::new(0.0, sy, 0.0), Vec3::new(0.0, 0.0, h), step * 2.0);

    let mut objects = Vec::with_capacity(layout.objects.len());
    for (k, o) in layout.objects.iter().enumerate() {
        let id = k as ObjectId + 1;
        let obb = OrientedBox::new(o.center, o.half_extents, axis_angle_deg(&Vec3::z(), o.yaw_deg))
            .expect("yaw rotation is proper");
        let first = mb.vertices.len() as u32;
        mb.cuboid(&obb, id);
        objects.push(ObjectAnnotation {
            object_id: id,
            label: o.label.clone(),
            obb,
            vertex_ids: (first..first + 8).collect(),
        });
    }
    let mesh = TriangleMesh::new(mb.vertices, mb.faces, mb.instance).expect("synthetic mesh is valid");
    let frames = poses
        .iter()
        .enumerate()
        .map(|(i, pose)| FrameMeta {
            frame_index: i as u32,
            image_path: format!("frames/{i:06}.png"),
            pose: *pose,
            camera,
        })
        .collect();
    SceneBundle::new(scene_id.to_string(), mesh, frames, objects, Vec3::z()).expect("synthetic scene is valid")
}

/// Camera walking an ellipse inside the room, looking at points on a smaller
/// ellipse around the room center.
pub fn elliptical_trajectory(size: [f64; 2], n: usize, eye_height: f64, phase: f64) -> Vec<RigidTransform> {
    let c = Vec3::new(size[0] / 2.0, size[1] / 2.0, 0.0);
    (0..n)
        .map(|i| {
            let t = phase + i as f64 / n as f64 * std::f64::consts::TAU;
            let eye = c + Vec3::new(0.38 * size[0] * t.cos(), 0.38 * size[1] * t.sin(), eye_height);
            let look = t + std::f64::consts::PI + 0.6 * (3.0 * t).sin();
            let target = c + Vec3::new(0.2 * size[0] * look.cos(), 0.2 * size[1] * look.sin(), 0.5);
            look_at(eye, target, Vec3::z())
        })
        .collect()
}

/// Densely sampled walk (about 2 cm per frame, slow turning).
pub fn dense_trajectory(n: usize) -> Vec<RigidTransform> {
    (0..n)
        .map(|i| {
            let t = i as f64 * 0.02;
            let eye = Vec3::new(1.0 + t, 1.5 + 0.3 * (t * 0.8).sin(), 1.4);
            let yaw = 0.15 * t;
            let dir = Vec3::new(yaw.sin(), yaw.cos(), -0.3);
            look_at(eye, eye + dir, Vec3::z())
        })
        .collect()
}

fn place(layout: &RoomLayout, cand: &SynthObject) -> bool {
    let margin = 0.15;
    let inside = cand.center.x - cand.half_extents.x > margin
        && cand.center.y - cand.half_extents.y > margin
        && cand.center.x + cand.half_extents.x < layout.size[0] - margin
        && cand.center.y + cand.half_extents.y < layout.size[1] - margin;
    let r = cand.half_extents.x.hypot(cand.half_extents.y);
    inside
        && layout.objects.iter().all(|o| {
            let ro = o.half_extents.x.hypot(o.half_extents.y);
            (o.center.xy() - cand.center.xy()).norm() > r + ro + 0.1
        })
}

/// A random furnished room with an elliptical camera walk.
pub fn random_room<R: Rng>(rng: &mut R, scene_id: &str, n_objects: usize, n_frames: usize) -> SceneBundle {
    let size = [rng.gen_range(5.0..8.0), rng.gen_range(4.5..7.0)];
    let mut layout = RoomLayout {
        size,
        wall_height: 2.6,
        grid_step: 0.5,
        objects: Vec::new(),
    };
    let mut tries = 0;
    while layout.objects.len() < n_objects && tries < 2000 {
        tries += 1;
        let half = Vec3::new(
            rng.gen_range(0.2..0.6),
            rng.gen_range(0.2..0.6),
            rng.gen_range(0.2..0.7),
        );
        let elevated = rng.gen_bool(0.2);
        let z = if elevated { rng.gen_range(0.8..1.6) } else { half.z };
        let cand = SynthObject {
            label: LABELS[rng.gen_range(0..LABELS.len())].to_string(),
            center: Vec3::new(rng.gen_range(0.0..size[0]), rng.gen_range(0.0..size[1]), z),
            half_extents: half,
            yaw_deg: rng.gen_range(-45.0..45.0),
        };
        if place(&layout, &cand) {
            layout.objects.push(cand);
        }
    }
    let poses = elliptical_trajectory(size, n_frames, rng.gen_range(1.3..1.7), rng.gen_range(0.0..6.0));
    room_scene(scene_id, &layout, &poses, default_camera())
}

fn obj(label: &str, c: [f64; 3], h: [f64; 3], yaw: f64) -> SynthObject {
    SynthObject {
        label: label.to_string(),
        center: Vec3::from(c),
        half_extents: Vec3::from(h),
        yaw_deg: yaw,
    }
}

/// The bundled mini scenes (`mini_a`, `mini_b`).
pub fn fixture_scene(name: &str) -> Option<SceneBundle> {
    let (size, objects, frames, phase) = match name {
        "mini_a" => (
            [6.0, 5.0],
            vec![
                obj("bed", [1.2, 1.3, 0.3], [0.9, 0.5, 0.3], 0.0),
                obj("chair", [4.6, 1.0, 0.45], [0.3, 0.3, 0.45], 20.0),
                obj("table", [3.2, 2.6, 0.4], [0.6, 0.4, 0.4], -10.0),
                obj("heater", [0.5, 4.2, 0.35], [0.3, 0.15, 0.35], 0.0),
                obj("chair", [4.9, 3.9, 0.45], [0.3, 0.3, 0.45], -30.0),
                obj("lamp", [2.3, 4.3, 0.6], [0.2, 0.2, 0.6], 0.0),
                obj("wardrobe", [5.5, 2.4, 0.9], [0.3, 0.6, 0.9], 0.0),
            ],
            24,
            0.3,
        ),
        "mini_b" => (
            [5.0, 4.5],
            vec![
                obj("sofa", [1.3, 0.8, 0.35], [0.9, 0.4, 0.35], 0.0),
                obj("desk", [3.9, 3.6, 0.4], [0.6, 0.35, 0.4], 0.0),
                obj("monitor", [3.9, 3.6, 1.0], [0.3, 0.08, 0.2], 0.0),
                obj("plant", [0.6, 3.8, 0.5], [0.25, 0.25, 0.5], 0.0),
                obj("box", [2.6, 2.2, 0.2], [0.25, 0.2, 0.2], 35.0),
                obj("box", [4.3, 1.0, 0.25], [0.3, 0.25, 0.25], 10.0),
                obj("cabinet", [0.4, 2.2, 0.6], [0.25, 0.5, 0.6], 0.0),
            ],
            20,
            1.7,
        ),
        _ => return None,
    };
    let layout = RoomLayout {
        size,
        wall_height: 2.6,
        grid_step: 0.5,
        objects,
    };
    let poses = elliptical_trajectory(size, frames, 1.5, phase);
    Some(room_scene(name, &layout, &poses, default_camera()))
}
