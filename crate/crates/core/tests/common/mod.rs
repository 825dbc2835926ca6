#![allow(dead_code)]

use std::path::{Path, PathBuf};

pub const FIXTURES: [&str; 2] = ["mini_a", "mini_b"];

pub fn fixtures_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn fixture_dirs() -> Vec<PathBuf> {
    FIXTURES.iter().map(|n| fixtures_root().join(n)).collect()
}

pub fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

pub fn blessing() -> bool {
    std::env::var_os("SPARGEN_BLESS").is_some_and(|v| v == "1")
}

/// Compares `actual` with the golden file, rewriting it when blessing.
pub fn check_golden(name: &str, actual: &str) {
    let path = golden(name);
    if blessing() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("{}: {e} (run with SPARGEN_BLESS=1 to create)", path.display()));
    if expected != actual {
        let line = expected
            .lines()
            .zip(actual.lines())
            .position(|(a, b)| a != b)
            .unwrap_or(expected.lines().count().min(actual.lines().count()));
        panic!("{} differs from output starting at line {}", path.display(), line + 1);
    }
}

pub mod raycast {
    use rand::Rng;
    use spargen_core::camera::CameraModel;
    use spargen_core::geometry::Vec3;
    use spargen_core::raster::NEAR_PLANE;
    use spargen_core::scene::TriangleMesh;

    /// Nearest hit along the camera ray through the center of pixel `(x, y)`,
    /// as `(face, z)`. The mesh is given in camera coordinates.
    pub fn cast(camera: &CameraModel, tris: &[[Vec3; 3]], x: u32, y: u32) -> Option<(usize, f64)> {
        let d = Vec3::new(
            (x as f64 + 0.5 - camera.cx) / camera.fx,
            (y as f64 + 0.5 - camera.cy) / camera.fy,
            1.0,
        );
        let mut best: Option<(usize, f64)> = None;
        for (i, [a, b, c]) in tris.iter().enumerate() {
            let (e1, e2) = (b - a, c - a);
            let p = d.cross(&e2);
            let det = e1.dot(&p);
            if det.abs() < 1e-15 {
                continue;
            }
            let s = -a;
            let u = s.dot(&p) / det;
            let q = s.cross(&e1);
            let v = d.dot(&q) / det;
            if u < 0.0 || v < 0.0 || u + v > 1.0 {
                continue;
            }
            // d.z == 1, so the ray parameter is the depth
            let t = e2.dot(&q) / det;
            if t >= NEAR_PLANE && best.is_none_or(|(_, z)| t < z) {
                best = Some((i, t));
            }
        }
        best
    }

    pub fn random_triangles<R: Rng>(rng: &mut R, n: usize, camera: &CameraModel) -> Vec<[Vec3; 3]> {
        (0..n)
            .map(|_| {
                let z0 = rng.gen_range(1.0..4.0);
                let cx = rng.gen_range(-0.6..0.6) * z0 * camera.width as f64 / camera.fx;
                let cy = rng.gen_range(-0.6..0.6) * z0 * camera.height as f64 / camera.fy;
                [(); 3].map(|_| {
                    Vec3::new(
                        cx + rng.gen_range(-1.0..1.0) * z0 * 0.5,
                        cy + rng.gen_range(-1.0..1.0) * z0 * 0.5,
                        z0 + rng.gen_range(-0.5..0.5),
                    )
                })
            })
            .collect()
    }

    pub fn mesh(tris: &[[Vec3; 3]]) -> TriangleMesh {
        let vertices: Vec<Vec3> = tris.iter().flatten().copied().collect();
        let faces = (0..tris.len() as u32).map(|i| [3 * i, 3 * i + 1, 3 * i + 2]).collect();
        let n = vertices.len();
        TriangleMesh::new(vertices, faces, vec![None; n]).unwrap()
    }
}

pub mod grounding {
    use spargen_core::grounding::GroundTruthRecord;

    pub struct Fixture {
        pub records: Vec<GroundTruthRecord>,
        pub predictions: Vec<(String, String)>,
        pub tally: serde_json::Value,
    }

    pub fn load() -> Fixture {
        let dir = super::fixtures_root().join("grounding");
        let read = |n: &str| std::fs::read_to_string(dir.join(n)).unwrap();
        let records = read("gt.jsonl").lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        let predictions = read("pred.jsonl")
            .lines()
            .map(|l| {
                let v: serde_json::Value = serde_json::from_str(l).unwrap();
                (v["id"].as_str().unwrap().to_string(), v["text"].as_str().unwrap().to_string())
            })
            .collect();
        Fixture {
            records,
            predictions,
            tally: serde_json::from_str(&read("tally.json")).unwrap(),
        }
    }
}
