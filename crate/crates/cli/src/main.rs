use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use spargen_core::eval::{
    bev_ape, chance_baselines, evaluate, format_report, sample_benchmark, BevSample, Response, BENCHMARK_PER_TASK,
    TINY_PER_TASK,
};
use spargen_core::geometry::Vec3;
use spargen_core::grounding::{build_samples, grounding_accuracy, GroundTruthRecord, GROUNDING_THRESHOLDS};
use spargen_core::keyframe::SubsampleConfig;
use spargen_core::pipeline::{
    discover_scenes, index_scene, items_to_jsonl, keyframes, load_scene, run_generate, PipelineConfig, SceneState,
};
use spargen_core::qa::QAItem;

#[derive(Parser)]
#[command(name = "spargen", version, about = "Spatial QA generation and evaluation")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML pipeline config; defaults to the ScanNet profile.
    #[arg(long, global = true, env = "SPARGEN_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, global = true, env = "SPARGEN_SEED")]
    seed: Option<u64>,
    #[arg(long, global = true, env = "SPARGEN_WORKERS")]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Select keyframes of one scene.
    Subsample {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        d_th: Option<f64>,
        #[arg(long)]
        theta_th: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build image and object records of one scene.
    Index {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full pipeline over a scene or a directory of scenes.
    Generate {
        #[arg(long, required = true, num_args = 1..)]
        scenes: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also write marked images for every item.
        #[arg(long)]
        render_images: bool,
    },
    /// Draw a fixed number of items per benchmark task.
    BenchSample {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, conflicts_with = "tiny")]
        per_task: Option<usize>,
        /// 50 items per task.
        #[arg(long)]
        tiny: bool,
    },
    Evaluate {
        #[arg(long)]
        benchmark: PathBuf,
        #[arg(long)]
        responses: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    GroundEval {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        ground_truth: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    BevEval {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
}

/// Input file absent; reported with exit status 2.
#[derive(Debug)]
struct MissingInput(PathBuf);

impl fmt::Display for MissingInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "no such file: {}", self.0.display())
    }
}

impl std::error::Error for MissingInput {}

fn read_input(path: &Path) -> Result<String> {
    match fs::read_to_string(path) {
        Ok(s) => Ok(s),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(MissingInput(path.to_path_buf()).into()),
        Err(e) => Err(e).with_context(|| path.display().to_string()),
    }
}

fn require_dir(path: &Path) -> Result<()> {
    if !path.is_dir() {
        return Err(MissingInput(path.to_path_buf()).into());
    }
    Ok(())
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = read_input(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{}:{}", path.display(), i + 1)))
        .collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| parent.display().to_string())?;
    }
    let body = serde_json::to_string_pretty(value)?;
    fs::write(path, body + "\n").with_context(|| path.display().to_string())
}

fn config(global: &Global) -> Result<PipelineConfig> {
    let mut cfg = match &global.config {
        Some(path) => {
            if !path.is_file() {
                return Err(MissingInput(path.clone()).into());
            }
            PipelineConfig::load(path)?
        }
        None => PipelineConfig::default(),
    };
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    if let Some(workers) = global.workers {
        cfg.workers = workers;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let mut cfg = config(&cli.global)?;
    match cli.command {
        Command::Subsample {
            scene,
            d_th,
            theta_th,
            out,
        } => {
            require_dir(&scene)?;
            if d_th.is_some() || theta_th.is_some() {
                let base = cfg.keyframes().unwrap_or(SubsampleConfig::SCANNET);
                let s = SubsampleConfig::new(d_th.unwrap_or(base.d_th), theta_th.unwrap_or(base.theta_th))?;
                cfg.subsample = Some(s);
            }
            let bundle = load_scene(&scene, &cfg).map_err(anyhow::Error::msg)?;
            let kept = keyframes(&bundle, &cfg);
            log::info!("{}: kept {} of {} frames", bundle.scene_id, kept.len(), bundle.frames.len());
            write_json(&out, &kept)?;
        }
        Command::Index { scene, out } => {
            require_dir(&scene)?;
            let bundle = load_scene(&scene, &cfg).map_err(anyhow::Error::msg)?;
            let (kept, records) = index_scene(&bundle, &cfg);
            log::info!(
                "{}: {} keyframes, {} objects indexed, {} rejections",
                bundle.scene_id,
                kept.len(),
                records.objects.len(),
                records.rejections.len()
            );
            write_json(&out, &records)?;
        }
        Command::Generate {
            scenes,
            out,
            render_images,
        } => {
            cfg.render_images |= render_images;
            let mut dirs = Vec::new();
            for root in &scenes {
                require_dir(root)?;
                dirs.extend(discover_scenes(root)?);
            }
            if dirs.is_empty() {
                bail!("no scene.json found under {scenes:?}");
            }
            let manifest = run_generate(&cfg, &dirs, &out)?;
            for s in &manifest.scenes {
                match s.status {
                    SceneState::Failed => log::error!("{}: failed: {}", s.name, s.reason.as_deref().unwrap_or("")),
                    _ => log::info!("{}: {:?}, {} items", s.name, s.status, s.n_items),
                }
            }
            println!("{} items from {} scenes ({} failed)", manifest.n_items, manifest.scenes.len(), manifest.n_failed());
            for (task, n) in &manifest.task_counts {
                println!("  {:<14} {n}", task.name());
            }
            if manifest.all_failed() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::BenchSample {
            input,
            out,
            per_task,
            tiny,
        } => {
            let items: Vec<QAItem> = read_jsonl(&input)?;
            let n = if tiny { TINY_PER_TASK } else { per_task.unwrap_or(BENCHMARK_PER_TASK) };
            let bench = sample_benchmark(&items, n, cfg.seed);
            fs::write(&out, items_to_jsonl(&bench)).with_context(|| out.display().to_string())?;
            println!("{} items, {n} per task", bench.len());
            println!("{:<14} {:>7} {:>9}", "task", "random", "frequency");
            for (task, b) in chance_baselines(&bench) {
                let random = b.random.map_or("-".to_string(), |r| format!("{r:.2}"));
                println!("{:<14} {random:>7} {:>9.2}", task.name(), b.frequency);
            }
        }
        Command::Evaluate {
            benchmark,
            responses,
            report,
        } => {
            let items: Vec<QAItem> = read_jsonl(&benchmark)?;
            let responses: Vec<Response> = read_jsonl(&responses)?;
            let r = evaluate(&items, &responses);
            write_json(&report, &r)?;
            println!("{}", format_report(&r));
        }
        Command::GroundEval {
            predictions,
            ground_truth,
            report,
        } => {
            let records: Vec<GroundTruthRecord> = read_jsonl(&ground_truth)?;
            let preds: Vec<Response> = read_jsonl(&predictions)?;
            let pairs: Vec<(String, String)> = preds.into_iter().map(|r| (r.id, r.text)).collect();
            let r = grounding_accuracy(&build_samples(&records, &pairs)?, &GROUNDING_THRESHOLDS);
            write_json(&report, &r)?;
            println!("n={} unparseable={}", r.n, r.n_unparseable);
            for key in r.acc_raw.keys() {
                println!("{key:<9} raw {:>6.2}  refined {:>6.2}", r.acc_raw[key], r.acc_refined[key]);
            }
        }
        Command::BevEval { samples, report } => {
            let samples: Vec<BevSample> = read_jsonl(&samples)?;
            let up = cfg.up_axis.map_or(Vec3::z(), Vec3::from);
            let r = bev_ape(&samples, &up);
            write_json(&report, &r)?;
            let fmt = |s: &Option<spargen_core::eval::ApeStats>| {
                s.as_ref()
                    .map_or("-".to_string(), |s| format!("{:.3} (n={}, p50 {:.3}, p90 {:.3})", s.mean, s.n, s.p50, s.p90))
            };
            println!("APE {}  [{} samples, {} rejected]", fmt(&r.overall), r.n_samples, r.n_rejected);
            for b in &r.bins {
                let hi = b.hi.map_or("inf".to_string(), |h| h.to_string());
                println!("  [{}, {hi}) {}", b.lo, fmt(&b.stats));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<MissingInput>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
