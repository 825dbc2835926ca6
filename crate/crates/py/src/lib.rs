//! Python bindings. Structured results cross the boundary as plain
//! dicts and lists (via JSON), geometry as nested float lists.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

use spargen_core::eval::{self, BevSample, Response};
use spargen_core::geometry::{OrientedBox, RigidTransform, Vec3};
use spargen_core::grounding::{self, GroundTruthRecord};
use spargen_core::keyframe::{self, SubsampleConfig};
use spargen_core::pipeline::{self, PipelineConfig};
use spargen_core::qa::QAItem;
use spargen_core::scene::SceneBundle;
use spargen_core::task::{self, RoomAreaConfig};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(value_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(value_err)
}

fn config(toml: Option<&str>) -> PyResult<PipelineConfig> {
    toml.map_or(Ok(PipelineConfig::default()), |t| PipelineConfig::from_toml(t).map_err(value_err))
}

/// Camera-to-world rigid transform.
#[pyclass(name = "Pose", frozen, from_py_object)]
#[derive(Clone)]
struct PyPose(RigidTransform);

#[pymethods]
impl PyPose {
    /// From a 4x4 row-major matrix; identity when omitted.
    #[new]
    #[pyo3(signature = (matrix=None))]
    fn new(matrix: Option<[[f64; 4]; 4]>) -> PyResult<Self> {
        match matrix {
            Some(m) => RigidTransform::from_rows(&m).map(Self).map_err(value_err),
            None => Ok(Self(RigidTransform::identity())),
        }
    }

    fn matrix(&self) -> [[f64; 4]; 4] {
        self.0.to_rows()
    }

    fn translation(&self) -> [f64; 3] {
        (*self.0.translation()).into()
    }

    fn inverse(&self) -> Self {
        Self(self.0.inverse())
    }

    fn compose(&self, other: &PyPose) -> Self {
        Self(self.0.compose(&other.0))
    }

    fn transform_point(&self, p: [f64; 3]) -> [f64; 3] {
        self.0.transform_point(&Vec3::from(p)).into()
    }

    /// Rotation angle to another pose, degrees.
    fn angle_to(&self, other: &PyPose) -> f64 {
        keyframe::rotation_angle_deg(self.0.rotation(), other.0.rotation())
    }

    fn __repr__(&self) -> String {
        format!("Pose({:?})", self.0.to_rows())
    }
}

#[pyclass(name = "Box3D", frozen, from_py_object)]
#[derive(Clone)]
struct PyBox(grounding::Box3D);

#[pymethods]
impl PyBox {
    #[new]
    fn new(center: [f64; 3], size: [f64; 3]) -> PyResult<Self> {
        grounding::Box3D::new(Vec3::from(center), Vec3::from(size))
            .map(Self)
            .map_err(value_err)
    }

    #[getter]
    fn center(&self) -> [f64; 3] {
        self.0.center.into()
    }

    #[getter]
    fn size(&self) -> [f64; 3] {
        self.0.size.into()
    }

    fn volume(&self) -> f64 {
        self.0.volume()
    }

    fn iou(&self, other: &PyBox) -> f64 {
        grounding::iou3d(&self.0, &other.0)
    }

    fn __repr__(&self) -> String {
        format!("Box3D(center={:?}, size={:?})", self.center(), self.size())
    }
}

/// A loaded scene directory.
#[pyclass(name = "Scene", frozen)]
struct PyScene {
    scene: SceneBundle,
    config: PipelineConfig,
}

#[pymethods]
impl PyScene {
    #[new]
    #[pyo3(signature = (path, config_toml=None))]
    fn new(path: PathBuf, config_toml: Option<&str>) -> PyResult<Self> {
        let config = config(config_toml)?;
        let scene = pipeline::load_scene(&path, &config).map_err(PyIOError::new_err)?;
        Ok(Self { scene, config })
    }

    #[getter]
    fn scene_id(&self) -> &str {
        &self.scene.scene_id
    }

    #[getter]
    fn n_frames(&self) -> usize {
        self.scene.frames.len()
    }

    #[getter]
    fn n_objects(&self) -> usize {
        self.scene.objects.len()
    }

    fn poses(&self) -> Vec<PyPose> {
        self.scene.frames.iter().map(|f| PyPose(f.pose)).collect()
    }

    fn keyframes(&self) -> Vec<u32> {
        pipeline::keyframes(&self.scene, &self.config)
    }

    /// Image and object records over the keyframes.
    fn records<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let (_, records) = py.detach(|| pipeline::index_scene(&self.scene, &self.config));
        to_py(py, &records)
    }

    /// QA items of this scene as dicts.
    fn generate<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let items = py.detach(|| {
            let (_, records) = pipeline::index_scene(&self.scene, &self.config);
            spargen_core::generate::generate_dataset(&self.scene, &records, &self.config.generate, self.config.seed).items
        });
        to_py(py, &items)
    }
}

/// Keyframe indices of a pose sequence.
#[pyfunction]
fn subsample(poses: Vec<PyPose>, d_th: f64, theta_th: f64) -> PyResult<Vec<usize>> {
    let cfg = SubsampleConfig::new(d_th, theta_th).map_err(value_err)?;
    let poses: Vec<RigidTransform> = poses.into_iter().map(|p| p.0).collect();
    Ok(keyframe::subsample_poses(&poses, &cfg))
}

/// Runs the pipeline over scene directories and returns the manifest.
#[pyfunction]
#[pyo3(signature = (scene_dirs, out, config_toml=None))]
fn run_generate<'py>(
    py: Python<'py>,
    scene_dirs: Vec<PathBuf>,
    out: PathBuf,
    config_toml: Option<&str>,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = config(config_toml)?;
    let manifest = py
        .detach(|| pipeline::run_generate(&cfg, &scene_dirs, &out))
        .map_err(value_err)?;
    to_py(py, &manifest)
}

#[pyfunction]
fn score_mra(pred: f64, gt: f64) -> f64 {
    eval::score_mra(pred, gt)
}

/// Per-task, per-level and overall scores of responses (`{id, text}` dicts).
#[pyfunction]
fn evaluate<'py>(
    py: Python<'py>,
    items: &Bound<'py, PyAny>,
    responses: &Bound<'py, PyAny>,
) -> PyResult<Bound<'py, PyAny>> {
    let items: Vec<QAItem> = from_py(items)?;
    let responses: Vec<Response> = from_py(responses)?;
    to_py(py, &eval::evaluate(&items, &responses))
}

#[pyfunction]
#[pyo3(signature = (items, n_per_task=eval::BENCHMARK_PER_TASK, seed=0))]
fn sample_benchmark<'py>(
    py: Python<'py>,
    items: &Bound<'py, PyAny>,
    n_per_task: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let items: Vec<QAItem> = from_py(items)?;
    to_py(py, &eval::sample_benchmark(&items, n_per_task, seed))
}

/// Accuracy at IoU 0.25 and 0.5 before and after proposal refinement.
#[pyfunction]
fn ground_eval<'py>(
    py: Python<'py>,
    records: &Bound<'py, PyAny>,
    predictions: &Bound<'py, PyAny>,
) -> PyResult<Bound<'py, PyAny>> {
    let records: Vec<GroundTruthRecord> = from_py(records)?;
    let preds: Vec<Response> = from_py(predictions)?;
    let pairs: Vec<(String, String)> = preds.into_iter().map(|r| (r.id, r.text)).collect();
    let samples = grounding::build_samples(&records, &pairs).map_err(value_err)?;
    to_py(py, &grounding::grounding_accuracy(&samples, &grounding::GROUNDING_THRESHOLDS))
}

#[pyfunction]
#[pyo3(signature = (samples, up=[0.0, 0.0, 1.0]))]
fn bev_ape<'py>(py: Python<'py>, samples: &Bound<'py, PyAny>, up: [f64; 3]) -> PyResult<Bound<'py, PyAny>> {
    let samples: Vec<BevSample> = from_py(samples)?;
    to_py(py, &eval::bev_ape(&samples, &Vec3::from(up)))
}

/// (height, length, width) in centimeters of an axis-aligned box.
#[pyfunction]
fn object_dims(center: [f64; 3], half_extents: [f64; 3]) -> (f64, f64, f64) {
    let d = task::object_dims(&OrientedBox::axis_aligned(Vec3::from(center), Vec3::from(half_extents)));
    (d.height, d.length, d.width)
}

/// Floor area in square meters of a room's vertices.
#[pyfunction]
fn room_area(vertices: Vec<[f64; 3]>) -> PyResult<f64> {
    let pts: Vec<Vec3> = vertices.into_iter().map(Vec3::from).collect();
    task::room_area(&pts, &RoomAreaConfig::default()).map_err(value_err)
}

#[pymodule]
fn spargen(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPose>()?;
    m.add_class::<PyBox>()?;
    m.add_class::<PyScene>()?;
    m.add_function(wrap_pyfunction!(subsample, m)?)?;
    m.add_function(wrap_pyfunction!(run_generate, m)?)?;
    m.add_function(wrap_pyfunction!(score_mra, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(sample_benchmark, m)?)?;
    m.add_function(wrap_pyfunction!(ground_eval, m)?)?;
    m.add_function(wrap_pyfunction!(bev_ape, m)?)?;
    m.add_function(wrap_pyfunction!(object_dims, m)?)?;
    m.add_function(wrap_pyfunction!(room_area, m)?)?;
    Ok(())
}
