//! QA items, the template bank, option synthesis and visual marks.

use std::collections::{BTreeMap, HashMap};
use std::sync::OnceLock;

use image::{Rgb, RgbImage};
use rand::seq::index::sample;
use rand::Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::task::{AboveBelow, FrontBehind, LeftRight, SpatialRelation};
use crate::taxonomy::{QaType, Task, ViewMode};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QaError {
    #[error("no binding for placeholder [{0}]")]
    MissingBinding(String),
    #[error("mark out of image bounds: {0:?}")]
    OutOfBounds(Vec<f64>),
    #[error("template bank: {0}")]
    Templates(String),
    #[error("invalid item {id}: {reason}")]
    InvalidItem { id: String, reason: String },
}

pub const LETTERS: [&str; 4] = ["A", "B", "C", "D"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkColor {
    Red,
    Green,
    Blue,
}

impl MarkColor {
    pub fn rgb(self) -> [u8; 3] {
        match self {
            MarkColor::Red => [255, 0, 0],
            MarkColor::Green => [0, 255, 0],
            MarkColor::Blue => [0, 0, 255],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MarkColor::Red => "red",
            MarkColor::Green => "green",
            MarkColor::Blue => "blue",
        }
    }

    /// Colors for `n` marked objects: red; red and blue; red, green and blue.
    pub fn palette(n: usize) -> &'static [MarkColor] {
        match n {
            0 => &[],
            1 => &[MarkColor::Red],
            2 => &[MarkColor::Red, MarkColor::Blue],
            _ => &[MarkColor::Red, MarkColor::Green, MarkColor::Blue],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkKind {
    Point,
    Bbox,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisualMark {
    pub frame_ref: String,
    pub kind: MarkKind,
    /// `[x, y]` for points, `[x_min, y_min, x_max, y_max]` for boxes, in
    /// full-resolution pixels.
    pub pixels: Vec<f64>,
    pub color: MarkColor,
}

impl VisualMark {
    /// The "(red point)" phrase used in questions.
    pub fn phrase(&self) -> String {
        let kind = match self.kind {
            MarkKind::Point => "point",
            MarkKind::Bbox => "bbox",
        };
        format!("{} {kind}", self.color.name())
    }

    pub fn in_bounds(&self, width: u32, height: u32) -> bool {
        let (w, h) = (width as f64, height as f64);
        let ok = |x: f64, y: f64| (0.0..=w).contains(&x) && (0.0..=h).contains(&y);
        match (self.kind, self.pixels.as_slice()) {
            (MarkKind::Point, [x, y]) => ok(*x, *y),
            (MarkKind::Bbox, [x0, y0, x1, y1]) => ok(*x0, *y0) && ok(*x1, *y1) && x0 <= x1 && y0 <= y1,
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NumericGt {
    pub value: f64,
    pub unit: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QAItem {
    pub id: String,
    pub scene_id: String,
    pub task: Task,
    pub qa_type: QaType,
    pub view_mode: ViewMode,
    pub image_refs: Vec<String>,
    pub question: String,
    pub options: Vec<String>,
    pub answer: String,
    pub gt_numeric: Option<NumericGt>,
    pub marks: Vec<VisualMark>,
}

/// Decimal places used when printing a value on the given step grid.
pub fn decimals_for_step(step: f64) -> usize {
    if step >= 1.0 {
        0
    } else {
        (-step.log10()).ceil().max(0.0) as usize
    }
}

pub fn format_number(x: f64, decimals: usize) -> String {
    // adding 0.0 turns -0.0 into 0.0
    format!("{:.*}", decimals, x + 0.0)
}

impl QAItem {
    pub fn answer_index(&self) -> Option<usize> {
        LETTERS.iter().position(|l| *l == self.answer)
    }

    /// Checks the structural invariants of an item.
    pub fn validate(&self) -> Result<(), QaError> {
        let bad = |reason: String| {
            Err(QaError::InvalidItem {
                id: self.id.clone(),
                reason,
            })
        };
        match self.qa_type {
            QaType::Select => {
                if !(2..=4).contains(&self.options.len()) {
                    return bad(format!("{} options", self.options.len()));
                }
                match self.answer_index() {
                    Some(i) if i < self.options.len() => {}
                    _ => return bad(format!("answer {:?} is not an option letter", self.answer)),
                }
                let mut seen = std::collections::HashSet::new();
                if !self.options.iter().all(|o| seen.insert(o)) {
                    return bad("duplicate options".into());
                }
            }
            QaType::Fill | QaType::Sentence => {
                if !self.options.is_empty() {
                    return bad("options on a non-select item".into());
                }
            }
        }
        if self.qa_type == QaType::Fill {
            if let Some(gt) = &self.gt_numeric {
                if self.answer.parse::<f64>().ok() != Some(gt.value) {
                    return bad(format!("answer {:?} does not parse to {}", self.answer, gt.value));
                }
            }
        }
        let n = self.image_refs.len();
        let ok_count = match self.view_mode {
            ViewMode::Single => n == 1,
            ViewMode::Multi if self.task.is_pair_task() => n == 2,
            ViewMode::Multi => (3..=5).contains(&n),
        };
        if !ok_count {
            return bad(format!("{n} images for a {:?} item", self.view_mode));
        }
        if let Some(m) = self.marks.iter().find(|m| !self.image_refs.contains(&m.frame_ref)) {
            return bad(format!("mark on unknown image {}", m.frame_ref));
        }
        if self.question.contains("[label_") || self.answer.contains("[label_") {
            return bad("unresolved placeholder".into());
        }
        Ok(())
    }
}

pub type Bindings = BTreeMap<String, String>;

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\[([A-Za-z_]+)\]").expect("valid regex"))
}

/// Replaces every `[name]` placeholder with its binding.
pub fn render_text(text: &str, bindings: &Bindings) -> Result<String, QaError> {
    let re = placeholder_re();
    if let Some(missing) = re
        .captures_iter(text)
        .map(|c| c[1].to_string())
        .find(|k| !bindings.contains_key(k))
    {
        return Err(QaError::MissingBinding(missing));
    }
    Ok(re.replace_all(text, |c: &regex::Captures| bindings[&c[1]].clone()).into_owned())
}

/// Placeholder names used by a template, in order of appearance.
pub fn placeholders(text: &str) -> Vec<String> {
    placeholder_re().captures_iter(text).map(|c| c[1].to_string()).collect()
}

#[derive(Clone, Debug, Default, Deserialize)]
struct TaskTemplatesRaw {
    #[serde(default)]
    fill_suffix: Option<String>,
    #[serde(default)]
    fill: Vec<String>,
    #[serde(default)]
    select: Vec<String>,
    #[serde(default)]
    sentence: Vec<String>,
    #[serde(default)]
    answer: Vec<String>,
}

#[derive(Clone, Debug, Deserialize)]
struct BankRaw {
    center_clause: String,
    select_suffix: Vec<String>,
    tasks: BTreeMap<String, TaskTemplatesRaw>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Template {
    pub task: Task,
    pub qa_type: QaType,
    pub text: String,
}

#[derive(Clone, Debug)]
pub struct TaskTemplates {
    pub fill_suffix: String,
    pub questions: BTreeMap<QaType, Vec<String>>,
    /// Prose answers for sentence items.
    pub answers: Vec<String>,
}

/// The fixed template bank.
#[derive(Clone, Debug)]
pub struct TemplateBank {
    pub center_clause: String,
    pub select_suffix: Vec<String>,
    tasks: HashMap<Task, TaskTemplates>,
}

pub const MIN_PARAPHRASES: usize = 3;

impl TemplateBank {
    pub fn from_json(json: &str) -> Result<Self, QaError> {
        let raw: BankRaw = serde_json::from_str(json).map_err(|e| QaError::Templates(e.to_string()))?;
        if raw.select_suffix.len() < MIN_PARAPHRASES {
            return Err(QaError::Templates("too few select suffixes".into()));
        }
        let mut tasks = HashMap::new();
        for (name, t) in raw.tasks {
            let task: Task = name.parse().map_err(QaError::Templates)?;
            let mut questions = BTreeMap::new();
            for (qt, list) in [(QaType::Fill, t.fill), (QaType::Select, t.select), (QaType::Sentence, t.sentence)] {
                if list.is_empty() {
                    continue;
                }
                if list.len() < MIN_PARAPHRASES {
                    return Err(QaError::Templates(format!("{name}/{qt}: fewer than {MIN_PARAPHRASES} templates")));
                }
                questions.insert(qt, list);
            }
            if questions.contains_key(&QaType::Sentence) && t.answer.len() < MIN_PARAPHRASES {
                return Err(QaError::Templates(format!("{name}: fewer than {MIN_PARAPHRASES} answer templates")));
            }
            if questions.contains_key(&QaType::Fill) && t.fill_suffix.is_none() {
                return Err(QaError::Templates(format!("{name}: fill templates without fill_suffix")));
            }
            tasks.insert(
                task,
                TaskTemplates {
                    fill_suffix: t.fill_suffix.unwrap_or_default(),
                    questions,
                    answers: t.answer,
                },
            );
        }
        Ok(Self {
            center_clause: raw.center_clause,
            select_suffix: raw.select_suffix,
            tasks,
        })
    }

    /// The bank compiled into the library.
    pub fn builtin() -> &'static TemplateBank {
        static BANK: OnceLock<TemplateBank> = OnceLock::new();
        BANK.get_or_init(|| {
            TemplateBank::from_json(include_str!("../data/templates.json")).expect("bundled templates are valid")
        })
    }

    pub fn task(&self, task: Task) -> Option<&TaskTemplates> {
        self.tasks.get(&task)
    }

    pub fn qa_types(&self, task: Task) -> Vec<QaType> {
        self.task(task).map(|t| t.questions.keys().copied().collect()).unwrap_or_default()
    }

    pub fn templates(&self, task: Task, qa_type: QaType) -> Vec<Template> {
        self.task(task)
            .and_then(|t| t.questions.get(&qa_type))
            .map(|list| {
                list.iter()
                    .map(|text| Template {
                        task,
                        qa_type,
                        text: text.clone(),
                    })
                    .collect()
            })
            .unwrap_or_default()
    }
}

/// Tasks whose questions refer to object centers.
pub fn uses_object_centers(task: Task) -> bool {
    matches!(
        task.family(),
        "Depth" | "Dist" | "DistI" | "ObjRel" | "SpImag"
    )
}

/// The "A. x; B. y" option list.
pub fn format_options(options: &[String]) -> String {
    options
        .iter()
        .zip(LETTERS)
        .map(|(o, l)| format!("{l}. {o}"))
        .collect::<Vec<_>>()
        .join("; ")
}

/// "A, B, C or D" for four options, "A, B" for two.
pub fn letters_phrase(n: usize) -> String {
    match n {
        0 => String::new(),
        1 => "A".into(),
        2 => "A, B".into(),
        _ => format!("{} or {}", LETTERS[..n - 1].join(", "), LETTERS[n - 1]),
    }
}

/// How the answer of an item is phrased.
#[derive(Clone, Debug)]
pub enum AnswerSpec {
    Fill { text: String, gt: Option<NumericGt> },
    Select { options: Vec<String>, correct: usize },
    /// A prose answer template rendered with the same bindings.
    Sentence { template: String },
}

/// Identity and images of an item being instantiated.
#[derive(Clone, Debug)]
pub struct ItemContext {
    pub id: String,
    pub scene_id: String,
    pub view_mode: ViewMode,
    pub image_refs: Vec<String>,
    /// Instruction appended to fill questions.
    pub fill_suffix: String,
    /// Instruction appended to select questions (with `[options]` and `[letters]`).
    pub select_suffix: String,
    /// Sentence inserted after the question body, if any.
    pub center_clause: Option<String>,
}

/// Fills a template and its answer into a QA item.
pub fn instantiate(
    ctx: &ItemContext,
    template: &Template,
    bindings: &Bindings,
    answer: AnswerSpec,
    marks: Vec<VisualMark>,
) -> Result<QAItem, QaError> {
    let mut parts = vec![render_text(&template.text, bindings)?];
    if let Some(c) = &ctx.center_clause {
        parts.push(c.clone());
    }
    let (options, answer, gt_numeric) = match answer {
        AnswerSpec::Fill { text, gt } => {
            if !ctx.fill_suffix.is_empty() {
                parts.push(ctx.fill_suffix.clone());
            }
            (Vec::new(), text, gt)
        }
        AnswerSpec::Select { options, correct } => {
            let mut b = Bindings::new();
            b.insert("options".into(), format_options(&options));
            b.insert("letters".into(), letters_phrase(options.len()));
            parts.push(render_text(&ctx.select_suffix, &b)?);
            (options, LETTERS[correct].to_string(), None)
        }
        AnswerSpec::Sentence { template } => (Vec::new(), render_text(&template, bindings)?, None),
    };
    Ok(QAItem {
        id: ctx.id.clone(),
        scene_id: ctx.scene_id.clone(),
        task: template.task,
        qa_type: template.qa_type,
        view_mode: ctx.view_mode,
        image_refs: ctx.image_refs.clone(),
        question: parts.join(" "),
        options,
        answer,
        gt_numeric,
        marks,
    })
}

/// Bounded retries before distractors fall back to grid offsets.
const DISTRACTOR_TRIES: usize = 100;

fn snap(x: f64, step: f64) -> f64 {
    crate::task::round_to(x, step) + 0.0
}

/// Four distinct positive values on the `step` grid, one of them `gt`, with
/// the correct position drawn uniformly.
pub fn make_numeric_options<R: Rng + ?Sized>(gt: f64, step: f64, rng: &mut R) -> ([f64; 4], usize) {
    let gt = snap(gt, step);
    let mut values = vec![gt];
    let mut tries = 0;
    while values.len() < 4 && tries < DISTRACTOR_TRIES {
        tries += 1;
        let f = rng.gen_range(0.1..0.6);
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let d = snap(gt * (1.0 + sign * f), step);
        if d > 0.0 && !values.contains(&d) {
            values.push(d);
        }
    }
    let mut k = 1.0;
    while values.len() < 4 {
        for cand in [gt + k * step, gt - k * step] {
            let cand = snap(cand, step);
            if values.len() < 4 && cand > 0.0 && !values.contains(&cand) {
                values.push(cand);
            }
        }
        k += 1.0;
    }
    let correct = rng.gen_range(0..4);
    values.swap(0, correct);
    ([values[0], values[1], values[2], values[3]], correct)
}

/// The left-right, above-below, front-behind triple, empty slots for
/// indistinguishable axes ("left, , behind").
pub fn relation_triple(r: &SpatialRelation) -> String {
    format!("{}, {}, {}", r.left_right, r.above_below, r.front_behind)
}

fn all_triples() -> Vec<SpatialRelation> {
    let lr = [LeftRight::Left, LeftRight::Right, LeftRight::None];
    let ab = [AboveBelow::Above, AboveBelow::Below, AboveBelow::None];
    let fb = [FrontBehind::Front, FrontBehind::Behind, FrontBehind::None];
    let mut out = Vec::with_capacity(27);
    for &l in &lr {
        for &a in &ab {
            for &f in &fb {
                out.push(SpatialRelation {
                    left_right: l,
                    above_below: a,
                    front_behind: f,
                    ..Default::default()
                });
            }
        }
    }
    out
}

/// The correct triple plus three distinct distractors drawn from the other
/// 26 combinations.
pub fn make_relation_options<R: Rng + ?Sized>(gt: &SpatialRelation, rng: &mut R) -> ([String; 4], usize) {
    let gt = SpatialRelation {
        near_far: Default::default(),
        ..*gt
    };
    let others: Vec<SpatialRelation> = all_triples().into_iter().filter(|t| *t != gt).collect();
    let picks = sample(rng, others.len(), 3);
    let mut opts = vec![relation_triple(&gt)];
    opts.extend(picks.iter().map(|i| relation_triple(&others[i])));
    let correct = rng.gen_range(0..4);
    opts.swap(0, correct);
    ([opts[0].clone(), opts[1].clone(), opts[2].clone(), opts[3].clone()], correct)
}

/// Point marks are filled disks of this radius, px.
pub const POINT_RADIUS: i64 = 6;
/// Box marks are outlines of this width, px.
pub const BOX_THICKNESS: i64 = 3;

fn put(img: &mut RgbImage, x: i64, y: i64, c: Rgb<u8>) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, c);
    }
}

/// Draws marks onto `image`: red first, then green, then blue.
pub fn render_marks(image: &mut RgbImage, marks: &[VisualMark]) -> Result<(), QaError> {
    if let Some(m) = marks.iter().find(|m| !m.in_bounds(image.width(), image.height())) {
        return Err(QaError::OutOfBounds(m.pixels.clone()));
    }
    let mut ordered: Vec<&VisualMark> = marks.iter().collect();
    ordered.sort_by_key(|m| m.color);
    for m in ordered {
        let c = Rgb(m.color.rgb());
        match m.kind {
            MarkKind::Point => {
                let (cx, cy) = (m.pixels[0].floor() as i64, m.pixels[1].floor() as i64);
                for dy in -POINT_RADIUS..=POINT_RADIUS {
                    for dx in -POINT_RADIUS..=POINT_RADIUS {
                        if dx * dx + dy * dy <= POINT_RADIUS * POINT_RADIUS {
                            put(image, cx + dx, cy + dy, c);
                        }
                    }
                }
            }
            MarkKind::Bbox => {
                let x0 = m.pixels[0].floor() as i64;
                let y0 = m.pixels[1].floor() as i64;
                let x1 = (m.pixels[2].ceil() as i64 - 1).max(x0);
                let y1 = (m.pixels[3].ceil() as i64 - 1).max(y0);
                for y in y0..=y1 {
                    for x in x0..=x1 {
                        let edge = x - x0 < BOX_THICKNESS
                            || x1 - x < BOX_THICKNESS
                            || y - y0 < BOX_THICKNESS
                            || y1 - y < BOX_THICKNESS;
                        if edge {
                            put(image, x, y, c);
                        }
                    }
                }
            }
        }
    }
    Ok(())
}
