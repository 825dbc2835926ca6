//! Benchmark sampling, answer parsing and scoring, chance baselines and the
//! bird's-eye-view position probe.
//!
//! Numeric answers are scored with the threshold-averaged relative accuracy:
//! with `rho = |pred - gt| / gt`, the score is the fraction of the thresholds
//! 0.05, 0.10, ..., 0.50 that `rho` stays strictly below.

use std::collections::{BTreeMap, HashMap};
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::{RigidTransform, Vec3};
use crate::qa::{QAItem, LETTERS};
use crate::task::MotionDescriptor;
use crate::taxonomy::{QaType, Task, TaskLevel};

fn re(cell: &'static OnceLock<Regex>, pattern: &str) -> &'static Regex {
    cell.get_or_init(|| Regex::new(pattern).expect("valid regex"))
}

/// The first standalone option letter in a response. Uppercase letters win
/// over lowercase ones; a lowercase "a" only counts when it is the whole
/// answer, since it is usually the article.
pub fn parse_choice(text: &str) -> Option<char> {
    static UPPER: OnceLock<Regex> = OnceLock::new();
    static LOWER: OnceLock<Regex> = OnceLock::new();
    static BARE_A: OnceLock<Regex> = OnceLock::new();
    if let Some(m) = re(&UPPER, r"\b([A-D])\b").captures(text) {
        return m[1].chars().next();
    }
    if re(&BARE_A, r"^\s*\(?a[.)]?\s*$").is_match(text) {
        return Some('A');
    }
    re(&LOWER, r"\b([b-d])\b")
        .captures(text)
        .and_then(|m| m[1].chars().next())
        .map(|c| c.to_ascii_uppercase())
}

/// The first decimal number in a response (thousands separators allowed).
pub fn parse_number(text: &str) -> Option<f64> {
    static NUM: OnceLock<Regex> = OnceLock::new();
    let m = re(&NUM, r"[-+]?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?|[-+]?\.\d+").find(text)?;
    m.as_str().replace(',', "").parse().ok()
}

pub const MRA_THRESHOLDS: usize = 10;

/// Threshold-averaged relative accuracy in [0, 1].
pub fn score_mra(pred: f64, gt: f64) -> f64 {
    if !pred.is_finite() {
        return 0.0;
    }
    let rho = (pred - gt).abs() / gt.abs();
    let passed = (1..=MRA_THRESHOLDS).filter(|&k| rho < k as f64 / 20.0).count();
    passed as f64 / MRA_THRESHOLDS as f64
}

/// Reads the five-field camera motion answer. Every field must be present.
pub fn parse_motion(text: &str) -> Option<MotionDescriptor> {
    static FIELD: OnceLock<Regex> = OnceLock::new();
    let field = re(
        &FIELD,
        r"(?i)\b(move|rotate)\s+(right|left|down|up|forward|back|backward)\s*:\s*([-+]?\d+(?:\.\d+)?)",
    );
    let mut values: [Option<f64>; 5] = [None; 5];
    for c in field.captures_iter(text) {
        let v: f64 = c[3].parse().ok()?;
        let (slot, sign) = match (c[1].to_lowercase().as_str(), c[2].to_lowercase().as_str()) {
            ("move", "right") => (0, 1.0),
            ("move", "left") => (0, -1.0),
            ("move", "down") => (1, 1.0),
            ("move", "up") => (1, -1.0),
            ("move", "forward") => (2, 1.0),
            ("move", "back" | "backward") => (2, -1.0),
            ("rotate", "down") => (3, 1.0),
            ("rotate", "up") => (3, -1.0),
            ("rotate", "right") => (4, 1.0),
            ("rotate", "left") => (4, -1.0),
            _ => continue,
        };
        if values[slot].is_none() {
            values[slot] = Some(sign * v);
        }
    }
    let mut out = [0.0; 5];
    for (o, v) in out.iter_mut().zip(values) {
        *o = v?;
    }
    Some(MotionDescriptor::from_array(out))
}

/// Tolerance under which a zero ground-truth translation counts as matched, meters.
pub const ZERO_MOTION_TOLERANCE: f64 = 0.05;

/// Camera-motion score in [0, 1]: half the mean relative accuracy of the
/// three translations, half the fraction of the five fields whose direction
/// (sign, zero included) matches.
pub fn score_motion(pred: &MotionDescriptor, gt: &MotionDescriptor) -> f64 {
    let (p, g) = (pred.as_array(), gt.as_array());
    let translation: f64 = (0..3)
        .map(|i| {
            if g[i] == 0.0 {
                if p[i].abs() <= ZERO_MOTION_TOLERANCE {
                    1.0
                } else {
                    0.0
                }
            } else {
                score_mra(p[i], g[i])
            }
        })
        .sum::<f64>()
        / 3.0;
    let sign = |x: f64| {
        if x > 0.0 {
            1
        } else if x < 0.0 {
            -1
        } else {
            0
        }
    };
    let direction = (0..5).filter(|&i| sign(p[i]) == sign(g[i])).count() as f64 / 5.0;
    0.5 * translation + 0.5 * direction
}

fn normalize_text(s: &str) -> String {
    let lower = s.trim().trim_end_matches('.').to_lowercase();
    lower.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn normalize_slots(s: &str) -> Vec<String> {
    s.split(',').map(normalize_text).collect()
}

/// Outcome of scoring one response.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Scored {
    Value(f64),
    Unparseable,
    /// Sentence items have no automatic score.
    NotScorable,
}

/// Scores a response against an item, in [0, 1].
pub fn score_item(item: &QAItem, response: &str) -> Scored {
    match item.qa_type {
        QaType::Sentence => Scored::NotScorable,
        QaType::Select => match parse_choice(response) {
            Some(c) => {
                let valid = LETTERS[..item.options.len()].iter().any(|l| l.starts_with(c));
                if !valid {
                    return Scored::Unparseable;
                }
                Scored::Value(if item.answer.starts_with(c) { 1.0 } else { 0.0 })
            }
            None => Scored::Unparseable,
        },
        QaType::Fill => {
            if let Some(gt) = &item.gt_numeric {
                return match parse_number(response) {
                    Some(p) => Scored::Value(score_mra(p, gt.value)),
                    None => Scored::Unparseable,
                };
            }
            if item.task == Task::ViewChgI {
                let gt = parse_motion(&item.answer).expect("generated motion answers parse");
                return match parse_motion(response) {
                    Some(p) => Scored::Value(score_motion(&p, &gt)),
                    None => Scored::Unparseable,
                };
            }
            if response.trim().is_empty() {
                return Scored::Unparseable;
            }
            let hit = if item.answer.contains(',') {
                normalize_slots(response) == normalize_slots(&item.answer)
            } else {
                normalize_text(response) == normalize_text(&item.answer)
            };
            Scored::Value(if hit { 1.0 } else { 0.0 })
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub id: String,
    pub text: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskScore {
    /// Percent.
    pub score: f64,
    pub n_evaluated: usize,
    pub n_unparseable: usize,
    /// Items without a response; scored 0.
    pub n_missing: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_task: BTreeMap<Task, TaskScore>,
    /// Mean task score per level, over the benchmark tasks present.
    pub per_level: BTreeMap<TaskLevel, f64>,
    /// Mean over all scored tasks.
    pub overall: Option<f64>,
    pub n_evaluated: usize,
    pub n_unparseable: usize,
    pub n_missing: usize,
}

/// Percent score of one task's items. Unparseable and missing responses
/// count as 0; sentence items are left out.
pub fn score_task(items: &[&QAItem], responses: &HashMap<&str, &str>) -> TaskScore {
    let mut total = 0.0;
    let mut out = TaskScore::default();
    for item in items {
        let scored = match responses.get(item.id.as_str()) {
            Some(text) => score_item(item, text),
            None => {
                out.n_missing += 1;
                out.n_evaluated += 1;
                continue;
            }
        };
        match scored {
            Scored::Value(v) => {
                total += v;
                out.n_evaluated += 1;
            }
            Scored::Unparseable => {
                out.n_unparseable += 1;
                out.n_evaluated += 1;
            }
            Scored::NotScorable => {}
        }
    }
    if out.n_evaluated > 0 {
        out.score = 100.0 * total / out.n_evaluated as f64;
    }
    out
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Level means and the overall mean from per-task scores.
pub fn aggregate(per_task: &BTreeMap<Task, f64>) -> (BTreeMap<TaskLevel, f64>, Option<f64>) {
    let mut per_level = BTreeMap::new();
    for level in TaskLevel::ALL {
        let members: Vec<f64> = per_task
            .iter()
            .filter(|(t, _)| t.level() == Some(level))
            .map(|(_, &s)| s)
            .collect();
        if let Some(m) = mean(&members) {
            per_level.insert(level, m);
        }
    }
    let all: Vec<f64> = per_task.values().copied().collect();
    (per_level, mean(&all))
}

pub fn evaluate(items: &[QAItem], responses: &[Response]) -> EvalReport {
    let by_id: HashMap<&str, &str> = responses.iter().map(|r| (r.id.as_str(), r.text.as_str())).collect();
    let mut grouped: BTreeMap<Task, Vec<&QAItem>> = BTreeMap::new();
    for item in items.iter().filter(|i| i.qa_type != QaType::Sentence) {
        grouped.entry(item.task).or_default().push(item);
    }
    let mut report = EvalReport::default();
    for (task, members) in grouped {
        let s = score_task(&members, &by_id);
        report.n_evaluated += s.n_evaluated;
        report.n_unparseable += s.n_unparseable;
        report.n_missing += s.n_missing;
        report.per_task.insert(task, s);
    }
    let scores = report.per_task.iter().map(|(&t, s)| (t, s.score)).collect();
    let (per_level, overall) = aggregate(&scores);
    report.per_level = per_level;
    report.overall = overall;
    report
}

/// Table-style summary: overall, level means, then one line per task.
pub fn format_report(report: &EvalReport) -> String {
    let fmt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.2}"));
    let mut lines = vec![format!("Avg.    {}", fmt(report.overall))];
    for level in TaskLevel::ALL {
        lines.push(format!("{:<7} {}", level.name(), fmt(report.per_level.get(&level).copied())));
        for (task, s) in report.per_task.iter().filter(|(t, _)| t.level() == Some(level)) {
            lines.push(format!(
                "  {:<14} {:>6.2}  (n={}, unparseable={}, missing={})",
                task.name(),
                s.score,
                s.n_evaluated,
                s.n_unparseable,
                s.n_missing
            ));
        }
    }
    let extra: Vec<_> = report.per_task.iter().filter(|(t, _)| t.level().is_none()).collect();
    if !extra.is_empty() {
        lines.push("Other".into());
        for (task, s) in extra {
            lines.push(format!("  {:<14} {:>6.2}  (n={})", task.name(), s.score, s.n_evaluated));
        }
    }
    lines.join("\n")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    /// Expected percent score of a uniform guess; only for choice tasks.
    pub random: Option<f64>,
    /// Percent score of always giving the task's most common answer.
    pub frequency: f64,
}

fn mode<'a>(answers: impl Iterator<Item = &'a str>) -> Option<&'a str> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for a in answers {
        *counts.entry(a).or_default() += 1;
    }
    // ties go to the lexicographically first answer
    let best = counts.values().copied().max()?;
    counts.into_iter().find(|(_, c)| *c == best).map(|(a, _)| a)
}

/// Random and frequency baselines per task, in closed form.
pub fn chance_baselines(items: &[QAItem]) -> BTreeMap<Task, Baseline> {
    let mut grouped: BTreeMap<Task, Vec<&QAItem>> = BTreeMap::new();
    for item in items.iter().filter(|i| i.qa_type != QaType::Sentence) {
        grouped.entry(item.task).or_default().push(item);
    }
    let mut out = BTreeMap::new();
    for (task, members) in grouped {
        let selects: Vec<&QAItem> = members.iter().copied().filter(|i| i.qa_type == QaType::Select).collect();
        let random = (selects.len() == members.len())
            .then(|| 100.0 * selects.iter().map(|i| 1.0 / i.options.len() as f64).sum::<f64>() / selects.len() as f64);
        let guess = mode(members.iter().map(|i| i.answer.as_str())).unwrap_or_default();
        let total: f64 = members
            .iter()
            .map(|i| match score_item(i, guess) {
                Scored::Value(v) => v,
                _ => 0.0,
            })
            .sum();
        out.insert(
            task,
            Baseline {
                random,
                frequency: 100.0 * total / members.len() as f64,
            },
        );
    }
    out
}

fn task_seed(seed: u64, task: Task) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(b"benchmark");
    h.update(task.name().as_bytes());
    let mut key = [0u8; 32];
    key.copy_from_slice(&h.finalize());
    ChaCha8Rng::from_seed(key)
}

/// Up to `n_per_task` items per benchmark task, drawn uniformly without
/// replacement among the items of the task's benchmark question type.
/// Output is grouped by task in column order, ids ascending within a task.
pub fn sample_benchmark(items: &[QAItem], n_per_task: usize, seed: u64) -> Vec<QAItem> {
    let mut out = Vec::new();
    for task in Task::BENCHMARK {
        let mut pool: Vec<&QAItem> = items
            .iter()
            .filter(|i| i.task == task && i.qa_type == task.benchmark_qa_type())
            .collect();
        pool.sort_by(|a, b| a.id.cmp(&b.id));
        pool.dedup_by(|a, b| a.id == b.id);
        let mut rng = task_seed(seed, task);
        let mut picked: Vec<&QAItem> = pool.choose_multiple(&mut rng, n_per_task).copied().collect();
        picked.sort_by(|a, b| a.id.cmp(&b.id));
        out.extend(picked.into_iter().cloned());
    }
    out
}

/// Benchmark size of the full split, per task.
pub const BENCHMARK_PER_TASK: usize = 400;
/// Benchmark size of the tiny split, per task.
pub const TINY_PER_TASK: usize = 50;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum BevError {
    #[error("first view looks within 5 degrees of vertical")]
    VerticalGaze,
    #[error("a sample needs 3 to 7 objects, got {0}")]
    ObjectCount(usize),
}

/// Gaze directions closer than this to vertical are rejected, degrees.
pub const BEV_MIN_GAZE_ELEVATION_GAP: f64 = 5.0;

/// Ground-plane frame anchored at a view: origin below the camera, y along
/// the horizontal gaze, x to the observer's right.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BevFrame {
    pub origin: Vec3,
    pub x_axis: Vec3,
    pub y_axis: Vec3,
    pub up: Vec3,
}

pub fn bev_frame(first_pose: &RigidTransform, up: &Vec3) -> Result<BevFrame, BevError> {
    let up = up.normalize();
    let f = first_pose.forward();
    if f.dot(&up).abs() > BEV_MIN_GAZE_ELEVATION_GAP.to_radians().cos() {
        return Err(BevError::VerticalGaze);
    }
    let c = *first_pose.translation();
    let origin = c - up * c.dot(&up);
    let y_axis = (f - up * f.dot(&up)).normalize();
    let x_axis = y_axis.cross(&up);
    Ok(BevFrame {
        origin,
        x_axis,
        y_axis,
        up,
    })
}

impl BevFrame {
    pub fn to_bev(&self, p: &Vec3) -> [f64; 2] {
        let d = p - self.origin;
        [d.dot(&self.x_axis), d.dot(&self.y_axis)]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BevObject {
    #[serde(default)]
    pub label: Option<String>,
    /// World position, meters.
    pub gt: Vec3,
    /// Predicted `[x, y]` in the observer frame, meters.
    pub pred: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BevSample {
    #[serde(default)]
    pub id: String,
    pub first_pose: RigidTransform,
    pub objects: Vec<BevObject>,
}

impl BevSample {
    pub fn validate(&self) -> Result<(), BevError> {
        let n = self.objects.len();
        if !(3..=7).contains(&n) {
            return Err(BevError::ObjectCount(n));
        }
        Ok(())
    }
}

/// Distance bins by ground-truth distance from the origin, meters.
pub const BEV_BIN_EDGES: [f64; 7] = [0.0, 1.0, 2.0, 3.0, 5.0, 7.0, 10.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApeStats {
    pub n: usize,
    pub mean: f64,
    pub p50: f64,
    pub p90: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApeBin {
    pub lo: f64,
    /// `None` for the open last bin.
    pub hi: Option<f64>,
    pub stats: Option<ApeStats>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BevReport {
    pub overall: Option<ApeStats>,
    pub bins: Vec<ApeBin>,
    pub n_samples: usize,
    /// Samples dropped for a vertical first view or a bad object count.
    pub n_rejected: usize,
}

/// Linear-interpolation percentile of sorted data (`q` in [0, 1]).
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let rank = q * (n - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (rank - lo as f64) * (sorted[hi] - sorted[lo])
}

fn stats(errors: &[f64]) -> Option<ApeStats> {
    if errors.is_empty() {
        return None;
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(ApeStats {
        n: sorted.len(),
        mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
        p50: percentile(&sorted, 0.5),
        p90: percentile(&sorted, 0.9),
    })
}

pub fn bin_index(distance: f64) -> usize {
    BEV_BIN_EDGES.iter().rposition(|&lo| distance >= lo).unwrap_or(0)
}

/// Object-level position errors, overall and per distance bin.
pub fn bev_ape(samples: &[BevSample], up: &Vec3) -> BevReport {
    let mut all = Vec::new();
    let mut per_bin: Vec<Vec<f64>> = vec![Vec::new(); BEV_BIN_EDGES.len()];
    let mut n_rejected = 0;
    for s in samples {
        let frame = match s.validate().and_then(|_| bev_frame(&s.first_pose, up)) {
            Ok(f) => f,
            Err(_) => {
                n_rejected += 1;
                continue;
            }
        };
        for o in &s.objects {
            let [gx, gy] = frame.to_bev(&o.gt);
            let err = (o.pred[0] - gx).hypot(o.pred[1] - gy);
            all.push(err);
            per_bin[bin_index(gx.hypot(gy))].push(err);
        }
    }
    let bins = BEV_BIN_EDGES
        .iter()
        .enumerate()
        .map(|(i, &lo)| ApeBin {
            lo,
            hi: BEV_BIN_EDGES.get(i + 1).copied(),
            stats: stats(&per_bin[i]),
        })
        .collect();
    BevReport {
        overall: stats(&all),
        bins,
        n_samples: samples.len() - n_rejected,
        n_rejected,
    }
}
