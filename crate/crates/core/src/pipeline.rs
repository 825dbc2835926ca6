//! Scene-level orchestration: config, subsample → records → generate, and the
//! run manifest.
//!
//! Output layout of [`run_generate`]:
//!
//! ```text
//! out/
//!   qa.jsonl             all items, scenes in input order
//!   manifest.json        RunManifest
//!   scenes/<name>/
//!     kept.json records.json qa.jsonl status.json images/
//! ```

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use image::{Rgb, RgbImage};
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::generate::{generate_dataset, GenerateConfig};
use crate::geometry::Vec3;
use crate::keyframe::{subsample_frames, SubsampleConfig};
use crate::qa::{render_marks, QAItem};
use crate::scene::{load_scene_manifest, FrameIndex, LoadOptions, PoseConvention, SceneBundle};
use crate::taxonomy::Task;
use crate::visibility::{build_records, Records, VisibilityConfig};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetProfile {
    #[default]
    Scannet,
    Scannetpp,
    Structured3d,
}

impl DatasetProfile {
    /// Default keyframe thresholds; Structured3D frames are kept as-is.
    pub fn subsample(self) -> Option<SubsampleConfig> {
        match self {
            Self::Scannet => Some(SubsampleConfig::SCANNET),
            Self::Scannetpp => Some(SubsampleConfig::SCANNETPP),
            Self::Structured3d => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub dataset: DatasetProfile,
    /// Overrides the profile's keyframe thresholds.
    pub subsample: Option<SubsampleConfig>,
    pub pose_convention: PoseConvention,
    /// Overrides the up axis stored in each scene.
    pub up_axis: Option<[f64; 3]>,
    pub visibility: VisibilityConfig,
    pub generate: GenerateConfig,
    pub seed: u64,
    pub workers: usize,
    pub render_images: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetProfile::default(),
            subsample: None,
            pose_convention: PoseConvention::default(),
            up_axis: None,
            visibility: VisibilityConfig::default(),
            generate: GenerateConfig::default(),
            seed: 0,
            workers: 1,
            render_images: false,
        }
    }
}

impl PipelineConfig {
    pub fn for_profile(dataset: DatasetProfile) -> Self {
        Self {
            dataset,
            ..Self::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        let cfg: Self = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_toml(&text).map_err(|e| match e {
            PipelineError::Config(m) => PipelineError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if let Some(s) = &self.subsample {
            if let Err(e) = s.validate() {
                return bad(e.to_string());
            }
        }
        if let Some(up) = self.up_axis {
            let v = Vec3::from(up);
            if !v.iter().all(|x| x.is_finite()) || (v.norm() - 1.0).abs() > 1e-6 {
                return bad(format!("up_axis {up:?} must be a unit vector"));
            }
        }
        if let Err(e) = self.visibility.validate() {
            return bad(e.to_string());
        }
        if let Err(e) = self.generate.validate() {
            return bad(e);
        }
        if self.workers == 0 {
            return bad("workers must be positive".into());
        }
        Ok(())
    }

    pub fn keyframes(&self) -> Option<SubsampleConfig> {
        self.subsample.or(self.dataset.subsample())
    }

    /// Hash of everything that affects outputs; the worker count is excluded.
    pub fn hash(&self) -> String {
        let canonical = Self { workers: 0, ..self.clone() };
        let json = serde_json::to_vec(&canonical).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn load_scene(dir: &Path, cfg: &PipelineConfig) -> Result<SceneBundle, String> {
    let opts = LoadOptions {
        pose_convention: cfg.pose_convention,
    };
    let mut scene = load_scene_manifest(dir, opts).map_err(|e| e.to_string())?;
    if let Some(up) = cfg.up_axis {
        scene.up_axis = Vec3::from(up);
    }
    Ok(scene)
}

pub fn keyframes(scene: &SceneBundle, cfg: &PipelineConfig) -> Vec<FrameIndex> {
    match cfg.keyframes() {
        Some(s) => subsample_frames(&scene.frames, &s),
        None => scene.frames.iter().map(|f| f.frame_index).collect(),
    }
}

/// Keyframes and visibility records of a loaded scene.
pub fn index_scene(scene: &SceneBundle, cfg: &PipelineConfig) -> (Vec<FrameIndex>, Records) {
    let kept = keyframes(scene, cfg);
    let records = build_records(scene, &kept, &cfg.visibility);
    (kept, records)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneState {
    Ok,
    Failed,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneStatus {
    /// Directory name of the scene.
    pub name: String,
    pub scene_id: Option<String>,
    pub status: SceneState,
    pub reason: Option<String>,
    pub n_frames: usize,
    pub n_kept: usize,
    pub n_items: usize,
    pub task_counts: BTreeMap<Task, usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    pub scenes: Vec<SceneStatus>,
    pub task_counts: BTreeMap<Task, usize>,
    pub n_items: usize,
    pub skip_reasons: BTreeMap<Task, BTreeMap<String, usize>>,
    pub wall_time_s: f64,
}

impl RunManifest {
    pub fn n_failed(&self) -> usize {
        self.scenes.iter().filter(|s| s.status == SceneState::Failed).count()
    }

    pub fn all_failed(&self) -> bool {
        !self.scenes.is_empty() && self.n_failed() == self.scenes.len()
    }
}

#[derive(Serialize, Deserialize)]
struct StatusFile {
    config_hash: String,
    scene_id: String,
    n_frames: usize,
    n_kept: usize,
    task_counts: BTreeMap<Task, usize>,
    skips: BTreeMap<Task, BTreeMap<String, usize>>,
}

struct SceneResult {
    status: SceneStatus,
    skips: BTreeMap<Task, BTreeMap<String, usize>>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), String> {
    let body = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
    fs::write(path, body + "\n").map_err(|e| format!("{}: {e}", path.display()))
}

pub fn items_to_jsonl(items: &[QAItem]) -> String {
    items
        .iter()
        .map(|it| serde_json::to_string(it).expect("QAItem serializes") + "\n")
        .collect()
}

fn cached(dir: &Path, hash: &str) -> Option<StatusFile> {
    let status: StatusFile = serde_json::from_str(&fs::read_to_string(dir.join("status.json")).ok()?).ok()?;
    (status.config_hash == hash && dir.join("qa.jsonl").is_file()).then_some(status)
}

fn render_item_images(scene_dir: &Path, scene: &SceneBundle, item: &QAItem, out: &Path) -> Result<(), String> {
    for (k, image_ref) in item.image_refs.iter().enumerate() {
        let marks: Vec<_> = item.marks.iter().filter(|m| &m.frame_ref == image_ref).cloned().collect();
        if marks.is_empty() {
            continue;
        }
        let src = scene_dir.join(image_ref);
        let mut img = match image::open(&src) {
            Ok(img) => img.to_rgb8(),
            Err(_) => {
                let frame = scene
                    .frames
                    .iter()
                    .find(|f| &f.image_path == image_ref)
                    .ok_or_else(|| format!("unknown image {image_ref}"))?;
                RgbImage::from_pixel(frame.camera.width, frame.camera.height, Rgb([128, 128, 128]))
            }
        };
        render_marks(&mut img, &marks).map_err(|e| e.to_string())?;
        let name = format!("{}_{k}.png", item.id.replace('/', "_"));
        let path = out.join(name);
        img.save(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    Ok(())
}

fn process_scene(scene_dir: &Path, work: &Path, cfg: &PipelineConfig, hash: &str) -> Result<SceneResult, String> {
    let scene = load_scene(scene_dir, cfg)?;
    let (kept, records) = index_scene(&scene, cfg);
    let out = generate_dataset(&scene, &records, &cfg.generate, cfg.seed);
    for item in &out.items {
        item.validate().map_err(|e| e.to_string())?;
    }

    fs::create_dir_all(work).map_err(|e| format!("{}: {e}", work.display()))?;
    write_json(&work.join("kept.json"), &kept)?;
    write_json(&work.join("records.json"), &records)?;
    let qa_path = work.join("qa.jsonl");
    fs::write(&qa_path, items_to_jsonl(&out.items)).map_err(|e| format!("{}: {e}", qa_path.display()))?;
    if cfg.render_images {
        let images = work.join("images");
        fs::create_dir_all(&images).map_err(|e| format!("{}: {e}", images.display()))?;
        for item in &out.items {
            render_item_images(scene_dir, &scene, item, &images)?;
        }
    }
    let task_counts = out.counts();
    let status = StatusFile {
        config_hash: hash.to_string(),
        scene_id: scene.scene_id.clone(),
        n_frames: scene.frames.len(),
        n_kept: kept.len(),
        task_counts: task_counts.clone(),
        skips: out.skips.clone(),
    };
    write_json(&work.join("status.json"), &status)?;
    Ok(SceneResult {
        status: SceneStatus {
            name: String::new(),
            scene_id: Some(scene.scene_id),
            status: SceneState::Ok,
            reason: None,
            n_frames: status.n_frames,
            n_kept: status.n_kept,
            n_items: out.items.len(),
            task_counts,
        },
        skips: out.skips,
    })
}

/// Runs `f`, turning a panic into an error message.
fn isolate<T>(f: impl FnOnce() -> Result<T, String>) -> Result<T, String> {
    match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(payload) => Err(match payload.downcast_ref::<&str>() {
            Some(s) => format!("panic: {s}"),
            None => match payload.downcast_ref::<String>() {
                Some(s) => format!("panic: {s}"),
                None => "panic".to_string(),
            },
        }),
    }
}

fn scene_name(dir: &Path) -> Result<String, PipelineError> {
    dir.file_name()
        .and_then(|n| n.to_str())
        .map(str::to_string)
        .ok_or_else(|| PipelineError::Config(format!("bad scene directory {}", dir.display())))
}

fn run_one(dir: &Path, name: &str, scenes_out: &Path, cfg: &PipelineConfig, hash: &str) -> SceneResult {
    let final_dir = scenes_out.join(name);
    if let Some(st) = cached(&final_dir, hash) {
        info!("{name}: cached");
        return SceneResult {
            status: SceneStatus {
                name: name.to_string(),
                scene_id: Some(st.scene_id),
                status: SceneState::Skipped,
                reason: Some("cached".into()),
                n_frames: st.n_frames,
                n_kept: st.n_kept,
                n_items: st.task_counts.values().sum(),
                task_counts: st.task_counts,
            },
            skips: st.skips,
        };
    }
    let work = scenes_out.join(format!(".{name}.tmp"));
    let _ = fs::remove_dir_all(&work);
    let result = isolate(|| process_scene(dir, &work, cfg, hash)).and_then(|r| {
        if final_dir.exists() {
            fs::remove_dir_all(&final_dir).map_err(|e| format!("{}: {e}", final_dir.display()))?;
        }
        fs::rename(&work, &final_dir).map_err(|e| format!("{}: {e}", final_dir.display()))?;
        Ok(r)
    });
    match result {
        Ok(mut r) => {
            info!("{name}: {} items from {} of {} frames", r.status.n_items, r.status.n_kept, r.status.n_frames);
            r.status.name = name.to_string();
            r
        }
        Err(reason) => {
            warn!("{name}: failed: {reason}");
            let _ = fs::remove_dir_all(&work);
            SceneResult {
                status: SceneStatus {
                    name: name.to_string(),
                    scene_id: None,
                    status: SceneState::Failed,
                    reason: Some(reason),
                    n_frames: 0,
                    n_kept: 0,
                    n_items: 0,
                    task_counts: BTreeMap::new(),
                },
                skips: BTreeMap::new(),
            }
        }
    }
}

/// Generates QA for every scene directory into `out`. Scenes already
/// completed under the same config hash are reused.
pub fn run_generate(cfg: &PipelineConfig, scene_dirs: &[PathBuf], out: &Path) -> Result<RunManifest, PipelineError> {
    cfg.validate()?;
    let start = Instant::now();
    let hash = cfg.hash();
    let mut names = Vec::with_capacity(scene_dirs.len());
    let mut seen = HashSet::new();
    for dir in scene_dirs {
        let name = scene_name(dir)?;
        if !seen.insert(name.clone()) {
            return Err(PipelineError::Config(format!("duplicate scene name {name}")));
        }
        names.push(name);
    }
    let scenes_out = out.join("scenes");
    fs::create_dir_all(&scenes_out).map_err(io_err(&scenes_out))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    let results: Vec<SceneResult> = pool.install(|| {
        scene_dirs
            .par_iter()
            .zip(&names)
            .map(|(dir, name)| run_one(dir, name, &scenes_out, cfg, &hash))
            .collect()
    });

    let mut combined = String::new();
    let mut task_counts: BTreeMap<Task, usize> = BTreeMap::new();
    let mut skip_reasons: BTreeMap<Task, BTreeMap<String, usize>> = BTreeMap::new();
    for r in &results {
        if r.status.status == SceneState::Failed {
            continue;
        }
        let path = scenes_out.join(&r.status.name).join("qa.jsonl");
        combined.push_str(&fs::read_to_string(&path).map_err(io_err(&path))?);
        for (t, n) in &r.status.task_counts {
            *task_counts.entry(*t).or_default() += n;
        }
        for (t, reasons) in &r.skips {
            for (reason, n) in reasons {
                *skip_reasons.entry(*t).or_default().entry(reason.clone()).or_default() += n;
            }
        }
    }
    let qa_path = out.join("qa.jsonl");
    let tmp = out.join(".qa.jsonl.tmp");
    fs::write(&tmp, &combined).map_err(io_err(&tmp))?;
    fs::rename(&tmp, &qa_path).map_err(io_err(&qa_path))?;

    let manifest = RunManifest {
        config_hash: hash,
        seed: cfg.seed,
        n_items: task_counts.values().sum(),
        task_counts,
        skip_reasons,
        scenes: results.into_iter().map(|r| r.status).collect(),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    let manifest_path = out.join("manifest.json");
    write_json(&manifest_path, &manifest).map_err(PipelineError::Config)?;
    Ok(manifest)
}

/// Scene directories directly under `root` (those holding a `scene.json`),
/// sorted by name.
pub fn discover_scenes(root: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    if root.join("scene.json").is_file() {
        return Ok(vec![root.to_path_buf()]);
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .map_err(io_err(root))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("scene.json").is_file())
        .collect();
    dirs.sort();
    Ok(dirs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles_carry_thresholds() {
        assert_eq!(DatasetProfile::Scannet.subsample(), Some(SubsampleConfig::new(0.5, 15.0).unwrap()));
        assert_eq!(DatasetProfile::Scannetpp.subsample(), Some(SubsampleConfig::new(0.5, 45.0).unwrap()));
        assert_eq!(DatasetProfile::Structured3d.subsample(), None);
        let cfg = PipelineConfig::from_toml("dataset = \"structured3d\"\n[subsample]\nd_th = 1.0\ntheta_th = 30.0").unwrap();
        assert_eq!(cfg.keyframes(), Some(SubsampleConfig::new(1.0, 30.0).unwrap()));
    }

    #[test]
    fn toml_rejects_unknown_and_invalid() {
        assert!(PipelineConfig::from_toml("").is_ok());
        assert!(PipelineConfig::from_toml("sed = 3").is_err());
        assert!(PipelineConfig::from_toml("[visibility]\ntau = 0.3").is_err());
        assert!(PipelineConfig::from_toml("[visibility]\ntau_v = 0").is_err());
        assert!(PipelineConfig::from_toml("workers = 0").is_err());
        assert!(PipelineConfig::from_toml("up_axis = [0.0, 0.0, 2.0]").is_err());
        let cfg = PipelineConfig::from_toml("seed = 9\n[generate.max_per_scene]\n\"Depth-OC\" = 3").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.generate.max_per_scene.len(), 1);
    }

    #[test]
    fn hash_ignores_workers_only() {
        let a = PipelineConfig::default();
        let b = PipelineConfig { workers: 8, ..a.clone() };
        let c = PipelineConfig { seed: 1, ..a.clone() };
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn isolate_catches_panics() {
        assert_eq!(isolate(|| Ok::<_, String>(3)), Ok(3));
        let r: Result<(), String> = isolate(|| panic!("boom"));
        assert_eq!(r, Err("panic: boom".to_string()));
    }
}
