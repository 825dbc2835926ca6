//! Per-scene QA generation for every task.

use std::collections::{BTreeMap, HashSet};

use log::debug;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::geometry::{OrientedBox, RigidTransform, Vec3};
use crate::qa::{
    decimals_for_step, format_number, instantiate, make_numeric_options, make_relation_options, relation_triple,
    uses_object_centers, AnswerSpec, Bindings, ItemContext, MarkColor, MarkKind, NumericGt, QAItem, TemplateBank,
    VisualMark,
};
use crate::scene::{FrameIndex, ObjectId, SceneBundle};
use crate::task::{
    self, camera_pose_projection, distance_oc, distance_oo, imagined_relation, nearer_of, object_count, object_dims,
    position_match_sample, round_to, spatial_relation, view_change, AboveBelow, FrontBehind, LeftRight,
    MotionDescriptor, NearFar, Pick, PlacedObject, RelationConfig, RoomAreaConfig, SpatialRelation, TaskError,
};
use crate::taxonomy::{QaType, Task};
use crate::visibility::{ImageRecord, ObjectInView, Records};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerateConfig {
    pub relation: RelationConfig,
    pub room: RoomAreaConfig,
    /// Enabled tasks and their per-scene item cap.
    pub max_per_scene: BTreeMap<Task, usize>,
    /// Restricts the question types generated; all available types when unset.
    pub qa_types: Option<Vec<QaType>>,
    /// Generation attempts allowed per requested item.
    pub attempts_per_item: usize,
}

pub const DEFAULT_MAX_PER_SCENE: usize = 12;

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            relation: RelationConfig::default(),
            room: RoomAreaConfig::default(),
            max_per_scene: Task::ALL.iter().map(|&t| (t, DEFAULT_MAX_PER_SCENE)).collect(),
            qa_types: None,
            attempts_per_item: 25,
        }
    }
}

impl GenerateConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.relation.validate()?;
        self.room.validate()?;
        if self.attempts_per_item == 0 {
            return Err("attempts_per_item must be positive".into());
        }
        if let Some(types) = &self.qa_types {
            if types.is_empty() {
                return Err("qa_types must not be empty when set".into());
            }
        }
        Ok(())
    }

    pub fn with_only(tasks: &[Task], max: usize) -> Self {
        Self {
            max_per_scene: tasks.iter().map(|&t| (t, max)).collect(),
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GenerateOutput {
    pub items: Vec<QAItem>,
    /// Rejected attempts per task and reason.
    pub skips: BTreeMap<Task, BTreeMap<String, usize>>,
}

impl GenerateOutput {
    pub fn counts(&self) -> BTreeMap<Task, usize> {
        let mut out = BTreeMap::new();
        for item in &self.items {
            *out.entry(item.task).or_default() += 1;
        }
        out
    }
}

/// Seeds the stream of one (scene, task) pair.
pub fn task_rng(seed: u64, scene_id: &str, task: Task) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(scene_id.as_bytes());
    h.update([0u8]);
    h.update(task.name().as_bytes());
    let digest = h.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

/// Generates the QA items of one scene. Deterministic for a fixed seed.
pub fn generate_dataset(scene: &SceneBundle, records: &Records, cfg: &GenerateConfig, seed: u64) -> GenerateOutput {
    generate_with_bank(scene, records, cfg, seed, TemplateBank::builtin())
}

pub fn generate_with_bank(
    scene: &SceneBundle,
    records: &Records,
    cfg: &GenerateConfig,
    seed: u64,
    bank: &TemplateBank,
) -> GenerateOutput {
    let mut out = GenerateOutput::default();
    if records.images.is_empty() {
        return out;
    }
    let ctx = Ctx::new(scene, records, cfg);
    for (&task, &max) in &cfg.max_per_scene {
        if max == 0 {
            continue;
        }
        let types: Vec<QaType> = bank
            .qa_types(task)
            .into_iter()
            .filter(|t| cfg.qa_types.as_ref().is_none_or(|allowed| allowed.contains(t)))
            .collect();
        if types.is_empty() {
            continue;
        }
        let mut rng = task_rng(seed, &scene.scene_id, task);
        let mut seen = HashSet::new();
        let skips = out.skips.entry(task).or_default();
        let mut n = 0;
        let mut attempts = 0;
        while n < max && attempts < max * cfg.attempts_per_item {
            attempts += 1;
            let qa_type = types[n % types.len()];
            let built = draft(task, &ctx, qa_type, &mut rng).and_then(|d| {
                let id = format!("{}/{}/{n:04}", scene.scene_id, task.name());
                finish(&ctx, bank, task, qa_type, id, d, &mut rng)
            });
            match built {
                Ok(item) => {
                    let key = (item.question.clone(), item.answer.clone(), item.image_refs.clone());
                    if !seen.insert(key) {
                        *skips.entry("duplicate".into()).or_default() += 1;
                        continue;
                    }
                    debug_assert!(item.validate().is_ok(), "{:?}", item.validate());
                    out.items.push(item);
                    n += 1;
                }
                Err(reason) => {
                    debug!("{} {}: skipped ({reason})", scene.scene_id, task);
                    *skips.entry(reason).or_default() += 1;
                }
            }
        }
    }
    out.skips.retain(|_, v| !v.is_empty());
    out
}

type Skip = String;

fn snake<T: Serialize>(v: T) -> Skip {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

fn skip_of(e: TaskError) -> Skip {
    match e {
        TaskError::BehindCamera => "behind_camera".into(),
        TaskError::Skipped(r) => snake(r),
        TaskError::Rejected(r) => snake(r),
        TaskError::DegenerateGeometry => "degenerate_geometry".into(),
    }
}

fn skip(reason: &str) -> Skip {
    reason.to_string()
}

struct Ctx<'a> {
    scene: &'a SceneBundle,
    records: &'a Records,
    rel: RelationConfig,
    room: RoomAreaConfig,
    up: Vec3,
}

struct MarkSpec {
    role: char,
    frame: FrameIndex,
    kind: MarkKind,
    pixels: Vec<f64>,
    color: MarkColor,
}

/// A task instance before template choice.
struct Draft {
    /// Main view first.
    frames: Vec<FrameIndex>,
    bindings: Bindings,
    marks: Vec<MarkSpec>,
    answer: AnswerSpec,
}

impl<'a> Ctx<'a> {
    fn new(scene: &'a SceneBundle, records: &'a Records, cfg: &GenerateConfig) -> Self {
        Self {
            scene,
            records,
            rel: cfg.relation,
            room: cfg.room,
            up: scene.up_axis,
        }
    }

    fn image(&self, f: FrameIndex) -> &ImageRecord {
        self.records.image(f).expect("frame comes from the records")
    }

    fn label(&self, id: ObjectId) -> &str {
        self.scene.object(id).map(|o| o.label.as_str()).unwrap_or("object")
    }

    fn obb(&self, id: ObjectId) -> &OrientedBox {
        &self.scene.object(id).expect("annotated object").obb
    }

    fn center(&self, id: ObjectId) -> Vec3 {
        self.obb(id).center
    }

    fn placed(&self, id: ObjectId) -> PlacedObject<'_> {
        PlacedObject {
            center: self.center(id),
            obb: self.obb(id),
        }
    }

    /// An image with at least `k` visible objects.
    fn pick_image<R: Rng>(&self, k: usize, rng: &mut R) -> Result<&ImageRecord, Skip> {
        let candidates: Vec<&ImageRecord> =
            self.records.images.iter().filter(|i| i.visible_objects.len() >= k).collect();
        candidates.choose(rng).copied().ok_or_else(|| skip("too_few_objects"))
    }

    /// Distinct visible objects of one image.
    fn pick_objects<'i, R: Rng>(&self, img: &'i ImageRecord, k: usize, rng: &mut R) -> Vec<&'i ObjectInView> {
        img.visible_objects.choose_multiple(rng, k).collect()
    }

    /// A frame other than `not` where some object other than `exclude` is
    /// visible, with that object.
    fn pick_elsewhere<R: Rng>(
        &self,
        not: FrameIndex,
        exclude: &[ObjectId],
        rng: &mut R,
    ) -> Result<(FrameIndex, &ObjectInView), Skip> {
        let pairs: Vec<(FrameIndex, &ObjectInView)> = self
            .records
            .images
            .iter()
            .filter(|i| i.frame_index != not)
            .flat_map(|i| i.visible_objects.iter().map(move |o| (i.frame_index, o)))
            .filter(|(_, o)| !exclude.contains(&o.object_id))
            .collect();
        pairs.choose(rng).copied().ok_or_else(|| skip("single_view"))
    }

    fn to_cam(&self, pose: &RigidTransform, id: ObjectId) -> Vec3 {
        pose.inverse_transform_point(&self.center(id))
    }

    /// Image list for a multi-view item: `main`, the `required` frames, then
    /// padding up to a random size in 3..=5. Padding prefers frames that see
    /// one of `objects` when `covisible` is set.
    fn views<R: Rng>(
        &self,
        main: FrameIndex,
        required: &[FrameIndex],
        objects: &[ObjectId],
        covisible: bool,
        rng: &mut R,
    ) -> Result<Vec<FrameIndex>, Skip> {
        let mut rest: Vec<FrameIndex> = Vec::new();
        for &f in required {
            if f != main && !rest.contains(&f) {
                rest.push(f);
            }
        }
        if rest.len() + 1 > 5 {
            return Err(skip("too_many_views"));
        }
        let target = rng.gen_range(3..=5).max(rest.len() + 1);
        let unused: Vec<FrameIndex> = self
            .records
            .images
            .iter()
            .map(|i| i.frame_index)
            .filter(|f| *f != main && !rest.contains(f))
            .collect();
        let (mut first, mut second): (Vec<FrameIndex>, Vec<FrameIndex>) = if covisible {
            unused.into_iter().partition(|&f| {
                let img = self.image(f);
                objects.iter().any(|&id| img.object(id).is_some())
            })
        } else {
            (unused, Vec::new())
        };
        first.shuffle(rng);
        second.shuffle(rng);
        for f in first.into_iter().chain(second) {
            if rest.len() + 1 >= target {
                break;
            }
            rest.push(f);
        }
        if rest.len() + 1 < 3 {
            return Err(skip("too_few_views"));
        }
        rest.shuffle(rng);
        let mut out = vec![main];
        out.extend(rest);
        Ok(out)
    }
}

fn point_mark(role: char, frame: FrameIndex, img: &ImageRecord, o: &ObjectInView, color: MarkColor) -> MarkSpec {
    let [w, h] = img.resolution;
    let [x, y] = o.center_2d;
    let pixels = if (0.0..=w as f64).contains(&x) && (0.0..=h as f64).contains(&y) {
        vec![x, y]
    } else {
        o.bbox_center().to_vec()
    };
    let pixels = pixels.into_iter().map(|p| round_to(p, 0.1)).collect();
    MarkSpec {
        role,
        frame,
        kind: MarkKind::Point,
        pixels,
        color,
    }
}

fn bbox_mark(role: char, frame: FrameIndex, o: &ObjectInView, color: MarkColor) -> MarkSpec {
    MarkSpec {
        role,
        frame,
        kind: MarkKind::Bbox,
        pixels: o.bbox2d.iter().map(|&p| round_to(p, 0.1)).collect(),
        color,
    }
}

fn meters(x: f64) -> String {
    format_number(x, 1)
}

fn bind(b: &mut Bindings, k: &str, v: impl Into<String>) {
    b.insert(k.to_string(), v.into());
}

/// Fill or select answer for a positive number on a grid.
fn numeric_answer<R: Rng>(value: f64, step: f64, unit: &str, qa_type: QaType, rng: &mut R) -> Result<AnswerSpec, Skip> {
    let dec = decimals_for_step(step);
    let text = format_number(round_to(value, step), dec);
    let v: f64 = text.parse().expect("formatted number");
    if !(v > 0.0) {
        return Err(skip("non_positive_value"));
    }
    Ok(match qa_type {
        QaType::Select => {
            let (opts, correct) = make_numeric_options(v, step, rng);
            AnswerSpec::Select {
                options: opts.iter().map(|&o| format_number(o, dec)).collect(),
                correct,
            }
        }
        _ => AnswerSpec::Fill {
            text,
            gt: Some(NumericGt {
                value: v,
                unit: unit.into(),
            }),
        },
    })
}

/// Fill, select or sentence answer for a categorical ground truth; `sentence`
/// is the template for prose answers.
fn relation_answer<R: Rng>(gt: &SpatialRelation, qa_type: QaType, sentence: String, rng: &mut R) -> AnswerSpec {
    match qa_type {
        QaType::Select => {
            let (opts, correct) = make_relation_options(gt, rng);
            AnswerSpec::Select {
                options: opts.to_vec(),
                correct,
            }
        }
        QaType::Fill => AnswerSpec::Fill {
            text: relation_triple(gt),
            gt: None,
        },
        QaType::Sentence => AnswerSpec::Sentence { template: sentence },
    }
}

/// Puts `gt` at a uniformly drawn position among distinct distractors.
fn choice_answer<R: Rng>(gt: String, distractors: Vec<String>, n: usize, rng: &mut R) -> Result<AnswerSpec, Skip> {
    let mut opts = vec![gt.clone()];
    for d in distractors {
        if opts.len() == n {
            break;
        }
        if !opts.contains(&d) {
            opts.push(d);
        }
    }
    if opts.len() < n {
        return Err(skip("too_few_distractors"));
    }
    let correct = rng.gen_range(0..n);
    opts.swap(0, correct);
    Ok(AnswerSpec::Select { options: opts, correct })
}

/// "right below", "left", or "center" when both axes are indistinguishable.
pub fn lr_ab_phrase(r: &SpatialRelation) -> String {
    let words: Vec<&str> = [r.left_right.word(), r.above_below.word()]
        .into_iter()
        .filter(|w| !w.is_empty())
        .collect();
    if words.is_empty() {
        "center".into()
    } else {
        words.join(" ")
    }
}

pub fn fb_phrase(r: &SpatialRelation) -> String {
    match r.front_behind {
        FrontBehind::None => "same depth".into(),
        fb => fb.word().into(),
    }
}

pub fn nf_phrase(r: &SpatialRelation) -> &'static str {
    match r.near_far {
        NearFar::Near => "closer to the observer",
        NearFar::Far => "farther from the observer",
        NearFar::None => "about as far from the observer",
    }
}

/// The relation with the near-far axis dropped, as used by the three-slot
/// answer format.
fn three_axes(r: &SpatialRelation) -> SpatialRelation {
    SpatialRelation {
        near_far: NearFar::None,
        ..*r
    }
}

fn informative(r: &SpatialRelation) -> bool {
    r.left_right != LeftRight::None || r.above_below != AboveBelow::None || r.front_behind != FrontBehind::None
}

/// The motion answer of the view-change task, e.g.
/// "move left: 2.6, move down: 0.1, move forward: 0.2, rotate up: 10, rotate left: 0".
pub fn format_motion(m: &MotionDescriptor) -> String {
    let part = |pos: &str, neg: &str, v: f64, dec: usize| {
        let (word, mag) = if v < 0.0 { (neg, -v) } else { (pos, v) };
        format!("{word}: {}", format_number(mag, dec))
    };
    [
        part("move right", "move left", m.move_right, 1),
        part("move down", "move up", m.move_down, 1),
        part("move forward", "move back", m.move_forward, 1),
        part("rotate down", "rotate up", m.rotate_down, 0),
        part("rotate right", "rotate left", m.rotate_right, 0),
    ]
    .join(", ")
}

/// Coarse image region of a pixel: "upper left", "center", "lower right", ...
fn region(img: &ImageRecord, p: [f64; 2]) -> String {
    let [w, h] = img.resolution;
    let col = ((p[0] / w as f64) * 3.0).floor().clamp(0.0, 2.0) as usize;
    let row = ((p[1] / h as f64) * 3.0).floor().clamp(0.0, 2.0) as usize;
    let rows = ["upper", "middle", "lower"];
    let cols = ["left", "center", "right"];
    match (row, col) {
        (1, 1) => "center".into(),
        (1, c) => format!("middle {}", cols[c]),
        (r, 1) => format!("{} middle", rows[r]),
        (r, c) => format!("{} {}", rows[r], cols[c]),
    }
}

fn normalized_box(img: &ImageRecord, b: [f64; 4]) -> [i64; 4] {
    let [w, h] = img.resolution;
    let n = |v: f64, s: u32| ((v * 1000.0 / s as f64).round() as i64).clamp(0, 1000);
    [n(b[0], w), n(b[1], h), n(b[2], w), n(b[3], h)]
}

fn box_text(b: [i64; 4]) -> String {
    format!("[{}, {}, {}, {}]", b[0], b[1], b[2], b[3])
}

fn draft<R: Rng>(task: Task, ctx: &Ctx, qa_type: QaType, rng: &mut R) -> Result<Draft, Skip> {
    use Task::*;
    match task {
        DepthOc => depth_oc(ctx, qa_type, rng),
        DepthOcMv => depth_oc_mv(ctx, qa_type, rng),
        DepthOo => depth_oo(ctx, qa_type, false, rng),
        DepthOoMv => depth_oo(ctx, qa_type, true, rng),
        DistOc => dist_oc(ctx, qa_type, rng),
        DistOcMv => dist_oc_mv(ctx, qa_type, rng),
        DistOo => dist_oo(ctx, qa_type, false, rng),
        DistOoMv => dist_oo(ctx, qa_type, true, rng),
        PosMatch => pos_match(ctx, qa_type, rng),
        CamMotion => cam_motion(ctx, qa_type, rng),
        ViewChgI => view_chg(ctx, qa_type, rng),
        DistIOo => dist_i(ctx, qa_type, false, rng),
        DistIOoMv => dist_i(ctx, qa_type, true, rng),
        ObjRelOcMv => obj_rel_oc(ctx, qa_type, rng),
        ObjRelOo => obj_rel_oo(ctx, qa_type, false, rng),
        ObjRelOoMv => obj_rel_oo(ctx, qa_type, true, rng),
        SpImagOc => sp_imag_oc(ctx, qa_type, false, rng),
        SpImagOcMv => sp_imag_oc(ctx, qa_type, true, rng),
        SpImagOo => sp_imag_oo(ctx, qa_type, false, rng),
        SpImagOoMv => sp_imag_oo(ctx, qa_type, true, rng),
        Volume => volume(ctx, qa_type, rng),
        ObjFrameLoc => obj_frame_loc(ctx, qa_type, rng),
        AppearOrder => appear_order(ctx, qa_type, rng),
        ObjCount => obj_count(ctx, qa_type, rng),
        RoomSize => room_size(ctx, qa_type, rng),
    }
}

fn finish<R: Rng>(
    ctx: &Ctx,
    bank: &TemplateBank,
    task: Task,
    qa_type: QaType,
    id: String,
    mut d: Draft,
    rng: &mut R,
) -> Result<QAItem, Skip> {
    let templates = bank.templates(task, qa_type);
    let template = templates.choose(rng).ok_or_else(|| skip("no_template"))?;
    let tt = bank.task(task).expect("task has templates");
    for m in &d.marks {
        let kind = match m.kind {
            MarkKind::Point => "point",
            MarkKind::Bbox => "bbox",
        };
        d.bindings
            .insert(format!("mark_{}", m.role), format!("{} {kind}", m.color.name()));
    }
    let answer = match d.answer {
        AnswerSpec::Sentence { template: _ } => {
            let answers = &tt.answers;
            AnswerSpec::Sentence {
                template: answers.choose(rng).ok_or_else(|| skip("no_answer_template"))?.clone(),
            }
        }
        other => other,
    };
    let select_suffix = bank.select_suffix.choose(rng).expect("bank has select suffixes").clone();
    let image_refs: Vec<String> = d.frames.iter().map(|&f| ctx.image(f).image_path.clone()).collect();
    let marks: Vec<VisualMark> = d
        .marks
        .iter()
        .map(|m| VisualMark {
            frame_ref: ctx.image(m.frame).image_path.clone(),
            kind: m.kind,
            pixels: m.pixels.clone(),
            color: m.color,
        })
        .collect();
    let item_ctx = ItemContext {
        id,
        scene_id: ctx.scene.scene_id.clone(),
        view_mode: task.view_mode(),
        image_refs,
        fill_suffix: tt.fill_suffix.clone(),
        select_suffix,
        center_clause: (uses_object_centers(task) && qa_type != QaType::Sentence).then(|| bank.center_clause.clone()),
    };
    let item = instantiate(&item_ctx, template, &d.bindings, answer, marks).map_err(|e| e.to_string())?;
    item.validate().map_err(|e| e.to_string())?;
    Ok(item)
}

fn sentence() -> AnswerSpec {
    AnswerSpec::Sentence {
        template: String::new(),
    }
}

fn single(frame: FrameIndex) -> Vec<FrameIndex> {
    vec![frame]
}

fn depth_oc<R: Rng>(ctx: &Ctx, qa_type: QaType, rng: &mut R) -> Result<Draft, Skip> {
    let img = ctx.pick_image(1, rng)?;
    let a = ctx.pick_objects(img, 1, rng)[0];
    let depth = task::depth_of(&a.center_cam, &ctx.rel).map_err(skip_of)?;
    let mut b = Bindings::new();
    bind(&mut b, "label_A", ctx.label(a.object_id));
    bind(&mut b, "depth_A", meters(depth));
    let answer = match qa_type {
        QaType::Sentence => sentence(),
        _ => numeric_answer(depth, ctx.rel.round_step, "m", qa_type, rng)?,
    };
    Ok(Draft {
        frames: single(img.frame_index),
        bindings: b,
        marks: vec![point_mark('A', img.frame_index, img, a, MarkColor::Red)],
        answer,
    })
}

fn depth_oc_mv<R: Rng>(ctx: &Ctx, qa_type: QaType, rng: &mut R) -> Result<Draft, Skip> {
    let main = ctx.pick_image(1, rng)?;
    let a = ctx.pick_objects(main, 1, rng)[0];
    let (fb, bv) = ctx.pick_elsewhere(main.frame_index, &[a.object_id], rng)?;
    let depth_a = task::depth_of(&a.center_cam, &ctx.rel).map_err(skip_of)?;
    let depth_b = task::depth_of(&ctx.to_cam(&main.pose, bv.object_id), &ctx.rel).map_err(skip_of)?;
    let frames = ctx.views(main.frame_index, &[fb], &[a.object_id, bv.object_id], true, rng)?;
    let mut b = Bindings::new();
    bind(&mut b, "label_A", ctx.label(a.object_id));
    bind(&mut b, "label_B", ctx.label(bv.object_id));
    bind(&mut b, "depth_A", meters(depth_a));
    bind(&mut b, "depth_B", meters(depth_b));
    let answer = match qa_type {
        QaType::Sentence => sentence(),
        _ => numeric_answer(depth_b, ctx.rel.round_step, "m", qa_type, rng)?,
    };
    Ok(Draft {
        frames,
        bindings: b,
        marks: vec![
            point_mark('A', main.frame_index, main, a, MarkColor::Red),
            point_mark('B', fb, ctx.image(fb), bv, MarkColor::Blue),
        ],
        answer,
    })
}

/// Two objects for a pair task: both in one image, or the first in the main
/// view and the second elsewhere. Returns (frames, marks, centers in the main
/// camera frame, ids).
struct PairPick {
    frames: Vec<FrameIndex>,
    main: FrameIndex,
    ids: [ObjectId; 2],
    cam: [Vec3; 2],
    marks: Vec<MarkSpec>,
}

fn pick_pair<R: Rng>(ctx: &Ctx, multi: bool, kind: MarkKind, rng: &mut R) -> Result<PairPick, Skip> {
    let colors = MarkColor::palette(2);
    let mk = |role, frame, img: &ImageRecord, o: &ObjectInView, color| match kind {
        MarkKind::Point => point_mark(role, frame, img, o, color),
        MarkKind::Bbox => bbox_mark(role, frame, o, color),
    };
    if !multi {
        let img = ctx.pick_image(2, rng)?;
        let picked = ctx.pick_objects(img, 2, rng);
        let (a, b) = (picked[0], picked[1]);
        if a.bbox_overlaps(b) {
            return Err(skip("overlap_2d"));
        }
        if ctx.label(a.object_id) == ctx.label(b.object_id) {
            return Err(skip("ambiguous_labels"));
        }
        return Ok(PairPick {
            frames: single(img.frame_index),
            main: img.frame_index,
            ids: [a.object_id, b.object_id],
            cam: [a.center_cam, b.center_cam],
            marks: vec![
                mk('A', img.frame_index, img, a, colors[0]),
                mk('B', img.frame_index, img, b, colors[1]),
            ],
        });
    }
    let main = ctx.pick_image(1, rng)?;
    let a = ctx.pick_objects(main, 1, rng)[0];
    let (fb, bv) = ctx.pick_elsewhere(main.frame_index, &[a.object_id], rng)?;
    if ctx.label(a.object_id) == ctx.label(bv.object_id) {
        return Err(skip("ambiguous_labels"));
    }
    let frames = ctx.views(main.frame_index, &[fb], &[a.object_id, bv.object_id], true, rng)?;
    Ok(PairPick {
        frames,
        main: main.frame_index,
        ids: [a.object_id, bv.object_id],
        cam: [a.center_cam, ctx.to_cam(&main.pose, bv.object_id)],
        marks: vec![
            mk('A', main.frame_index, main, a, colors[0]),
            mk('B', fb, ctx.image(fb), bv, colors[1]),
        ],
    })
}

fn depth_oo<R: Rng>(ctx: &Ctx, qa_type: QaType, multi: bool, rng: &mut R) -> Result<Draft, Skip> {
    let p = pick_pair(ctx, multi, MarkKind::Point, rng)?;
    let da = task::depth_of(&p.cam[0], &ctx.rel).map_err(skip_of)?;
    let db = task::depth_of(&p.cam[1], &ctx.rel).map_err(skip_of)?;
    let delta = (p.cam[0].z - p.cam[1].z).abs();
    if delta < ctx.rel.indist_threshold {
        return Err(skip("similar_depth"));
    }
    let mut b = Bindings::new();
    let (la, lb) = (ctx.label(p.ids[0]), ctx.label(p.ids[1]));
    bind(&mut b, "label_A", la);
    bind(&mut b, "label_B", lb);
    let (deeper, shallower) = if da >= db { (la, lb) } else { (lb, la) };
    bind(&mut b, "deeper", deeper);
    bind(&mut b, "shallower", shallower);
    bind(&mut b, "delta", meters(round_to(delta, ctx.rel.round_step)));
    let answer = match qa_type {
        QaType::Sentence => sentence(),
        _ => numeric_answer(delta, ctx.rel.round_step, "m", qa_type, rng)?,
    };
    Ok(Draft {
        frames: p.frames,
        bindings: b,
        marks: p.marks,
        answer,
    })
}

fn dist_oc<R: Rng>(ctx: &Ctx, qa_type: QaType, rng: &mut R) -> Result<Draft, Skip> {
    let img = ctx.pick_image(1, rng)?;
    let a = ctx.pick_objects(img, 1, rng)[0];
    let d = distance_oc(&a.center_cam, &ctx.rel);
    let mut b = Bindings::new();
    bind(&mut b, "label_A", ctx.label(a.object_id));
    bind(&mut b, "dist_A", meters(d));
    let answer = match qa_type {
        QaType::Sentence => sentence(),
        _ => numeric_answer(d, ctx.rel.round_step, "m", qa_type, rng)?,
    };
    Ok(Draft {
        frames: single(img.frame_index),
        bindings: b,
        marks: vec![point_mark('A', img.frame_index, img, a, MarkColor::Red)],
        answer,
    })
}

fn dist_oc_mv<R: Rng>(ctx: &Ctx, qa_type: QaType, rng: &mut R) -> Result<Draft, Skip> {
    let p = pick_pair(ctx, true, MarkKind::Point, rng)?;
    let da = distance_oc(&p.cam[0], &ctx.rel);
    let db = distance_oc(&p.cam[1], &ctx.rel);
    let mut b = Bindings::new();
    bind(&mut b, "label_A", ctx.label(p.ids[0]));
    bind(&mut b, "label_B", ctx.label(p.ids[1]));
    bind(&mut b, "dist_A", meters(da));
    bind(&mut b, "dist_B", meters(db));
    let answer = match qa_type {
        QaType::Sentence => sentence(),
        _ => numeric_answer(db, ctx.rel.round_step, "m", qa_type, rng)?,
    };
    Ok(Draft {
        frames: p.frames,
        bindings: b,
        marks: p.marks,
        answer,
    })
}

fn dist_oo<R: Rng>(ctx: &Ctx, qa_type: QaType, multi: bool, rng: &mut R) -> Result<Draft, Skip> {
    let p = pick_pair(ctx, multi, MarkKind::Point, rng)?;
    let d = distance_oo(&ctx.placed(p.ids[0]), &ctx.placed(p.ids[1]), &ctx.rel).map_err(skip_of)?;
    let mut b = Bindings::new();
    bind(&mut b, "label_A", ctx.label(p.ids[0]));
    bind(&mut b, "label_B", ctx.label(p.ids[1]));
    bind(&mut b, "dist_AB", meters(d));
    let answer = match qa_type {
        QaType::Sentence => sentence(),
        _ => numeric_answer(d, ctx.rel.round_step, "m", qa_type, rng)?,
    };
    Ok(Draft {
        frames: p.frames,
        bindings: b,
        marks: p.marks,
        answer,
    })
}

fn dist_i<R: Rng>(ctx: &Ctx, qa_type: QaType, multi: bool, rng: &mut R) -> Result<Draft, Skip> {
    let colors = MarkColor::palette(3);
    let (frames, views): (Vec<FrameIndex>, Vec<(FrameIndex, &ObjectInView)>) = if multi {
        let main = ctx.pick_image(1, rng)?;
        let a = ctx.pick_objects(main, 1, rng)[0];
        let (fb, b) = ctx.pick_elsewhere(main.frame_index, &[a.object_id], rng)?;
        let others: Vec<(FrameIndex, &ObjectInView)> = ctx
            .records
            .images
            .iter()
            .flat_map(|i| i.visible_objects.iter().map(move |o| (i.frame_index, o)))
            .filter(|(_, o)| o.object_id != a.object_id && o.object_id != b.object_id)
            .collect();
        let &(fc, c) = others.choose(rng).ok_or_else(|| skip("too_few_objects"))?;
        let mut picked = [(fb, b), (fc, c)];
        picked.shuffle(rng);
        let frames = ctx.views(
            main.frame_index,
            &[picked[0].0, picked[1].0],
            &[a.object_id, b.object_id, c.object_id],
            true,
            rng,
        )?;
        (frames, vec![(main.frame_index, a), picked[0], picked[1]])
    } else {
        let img = ctx.pick_image(3, rng)?;
        let picked = ctx.pick_objects(img, 3, rng);
        (single(img.frame_index), picked.into_iter().map(|o| (img.frame_index, o)).collect())
    };
    let ids: Vec<ObjectId> = views.iter().map(|(_, o)| o.object_id).collect();
    let (la, lb, lc) = (ctx.label(ids[0]), ctx.label(ids[1]), ctx.label(ids[2]));
    if lb == lc {
        return Err(skip("ambiguous_labels"));
    }
    let r = nearer_of(&ctx.placed(ids[0]), &ctx.placed(ids[1]), &ctx.placed(ids[2]), &ctx.rel).map_err(skip_of)?;
    let closer = rng.gen_bool(0.5);
    let pick = if closer { r.nearer } else { r.farther() };
    let answer_label = match pick {
        Pick::B => lb,
        Pick::C => lc,
    };
    let mut b = Bindings::new();
    bind(&mut b, "label_A", la);
    bind(&mut b, "label_B", lb);
    bind(&mut b, "label_C", lc);
    bind(&mut b, "comparative", if closer { "closer" } else { "farther" });
    bind(&mut b, "dist_B", meters(r.d_b));
    bind(&mut b, "dist_C", meters(r.d_c));
    bind(&mut b, "answer_label", answer_label);
    let answer = match qa_type {
        QaType::Sentence => sentence(),
        QaType::Fill => AnswerSpec::Fill {
            text: answer_label.to_string(),
            gt: None,
        },
        QaType::Select => AnswerSpec::Select {
            options: vec![lb.to_string(), lc.to_string()],
            correct: match pick {
                Pick::B => 0,
                Pick::C => 1,
            },
        },
    };
    let marks = views
        .iter()
        .zip(['A', 'B', 'C'])
        .zip(colors)
        .map(|(((f, o), role), &color)| point_mark(role, *f, ctx.image(*f), o, color))
        .collect();
    Ok(Draft {
        frames,
        bindings: b,
        marks,
        answer,
    })
}

fn relation_bindings(b: &mut Bindings, r: &SpatialRelation) {
    bind(b, "rel_lr_ab", lr_ab_phrase(r));
    bind(b, "rel_fb", fb_phrase(r));
    bind(b, "rel_nf", nf_phrase(r));
}

fn obj_rel_oc<R: Rng>(ctx: &Ctx, qa_type: QaType, rng: &mut R) -> Result<Draft, Skip> {
    let main = ctx.pick_image(0, rng)?;
    let (fa, a) = ctx.pick_elsewhere(main.frame_index, &[], rng)?;
    let rel = spatial_relation(&ctx.to_cam(&main.pose, a.object_id), None, &ctx.rel);
    if !informative(&rel) {
        return Err(skip("indistinguishable"));
    }
    let frames = ctx.views(main.frame_index, &[fa], &[a.object_id], true, rng)?;
    let mut b = Bindings::new();
    bind(&mut b, "label_A", ctx.label(a.object_id));
    relation_bindings(&mut b, &rel);
    let answer = relation_answer(&three_axes(&rel), qa_type, String::new(), rng);
    Ok(Draft {
        frames,
        bindings: b,
        marks: vec![bbox_mark('A', fa, a, MarkColor::Red)],
        answer,
    })
}

fn obj_rel_oo<R: Rng>(ctx: &Ctx, qa_type: QaType, multi: bool, rng: &mut R) -> Result<Draft, Skip> {
    let p = pick_pair(ctx, multi, MarkKind::Bbox, rng)?;
    if ctx.obb(p.ids[0]).intersects(ctx.obb(p.ids[1])) {
        return Err(skip("overlap"));
    }
    let rel = spatial_relation(&p.cam[0], Some(&p.cam[1]), &ctx.rel);
    if !informative(&rel) {
        return Err(skip("indistinguishable"));
    }
    let mut b = Bindings::new();
    bind(&mut b, "label_A", ctx.label(p.ids[0]));
    bind(&mut b, "label_B", ctx.label(p.ids[1]));
    relation_bindings(&mut b, &rel);
    let answer = relation_answer(&three_axes(&rel), qa_type, String::new(), rng);
    Ok(Draft {
        frames: p.frames,
        bindings: b,
        marks: p.marks,
        answer,
    })
}

fn imag_bindings(b: &mut Bindings, before: &SpatialRelation, after: &SpatialRelation) {
    bind(b, "before_lr_ab", lr_ab_phrase(before));
    bind(b, "before_fb", fb_phrase(before));
    bind(b, "after_lr_ab", lr_ab_phrase(after));
    bind(b, "after_fb", fb_phrase(after));
}

fn sp_imag_oc<R: Rng>(ctx: &Ctx, qa_type: QaType, multi: bool, rng: &mut R) -> Result<Draft, Skip> {
    let colors = MarkColor::palette(3);
    let (main, frames, views): (&ImageRecord, Vec<FrameIndex>, Vec<(FrameIndex, &ObjectInView)>) = if multi {
        let main = ctx.pick_image(1, rng)?;
        let a = ctx.pick_objects(main, 1, rng)[0];
        let (fb, b) = ctx.pick_elsewhere(main.frame_index, &[a.object_id], rng)?;
        let others: Vec<(FrameIndex, &ObjectInView)> = ctx
            .records
            .images
            .iter()
            .flat_map(|i| i.visible_objects.iter().map(move |o| (i.frame_index, o)))
            .filter(|(_, o)| o.object_id != a.object_id && o.object_id != b.object_id)
            .collect();
        let &(fc, c) = others.choose(rng).ok_or_else(|| skip("too_few_objects"))?;
        let frames = ctx.views(main.frame_index, &[fb, fc], &[a.object_id, b.object_id, c.object_id], true, rng)?;
        (main, frames, vec![(main.frame_index, a), (fb, b), (fc, c)])
    } else {
        let img = ctx.pick_image(3, rng)?;
        let picked = ctx.pick_objects(img, 3, rng);
        (img, single(img.frame_index), picked.into_iter().map(|o| (img.frame_index, o)).collect())
    };
    let ids: Vec<ObjectId> = views.iter().map(|(_, o)| o.object_id).collect();
    let (before, after) = imagined_relation(
        &ctx.center(ids[1]),
        &ctx.center(ids[2]),
        &ctx.center(ids[0]),
        None,
        &main.pose,
        &ctx.up,
        &ctx.rel,
    )
    .map_err(skip_of)?;
    if !informative(&after) {
        return Err(skip("indistinguishable"));
    }
    let mut b = Bindings::new();
    bind(&mut b, "label_A", ctx.label(ids[0]));
    bind(&mut b, "label_B", ctx.label(ids[1]));
    bind(&mut b, "label_C", ctx.label(ids[2]));
    imag_bindings(&mut b, &before, &after);
    let answer = relation_answer(&three_axes(&after), qa_type, String::new(), rng);
    let marks = views
        .iter()
        .zip(['A', 'B', 'C'])
        .zip(colors)
        .map(|(((f, o), role), &color)| bbox_mark(role, *f, o, color))
        .collect();
    Ok(Draft {
        frames,
        bindings: b,
        marks,
        answer,
    })
}

/// Objects whose label occurs once in the scene.
fn uniquely_labelled(ctx: &Ctx) -> Vec<ObjectId> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for o in &ctx.scene.objects {
        *counts.entry(o.label.as_str()).or_default() += 1;
    }
    ctx.scene
        .objects
        .iter()
        .filter(|o| counts[o.label.as_str()] == 1)
        .map(|o| o.object_id)
        .collect()
}

fn sp_imag_oo<R: Rng>(ctx: &Ctx, qa_type: QaType, multi: bool, rng: &mut R) -> Result<Draft, Skip> {
    let p = pick_pair(ctx, multi, MarkKind::Bbox, rng)?;
    let unique: Vec<ObjectId> = uniquely_labelled(ctx)
        .into_iter()
        .filter(|id| !p.ids.contains(id))
        .collect();
    let cd: Vec<ObjectId> = unique.choose_multiple(rng, 2).copied().collect();
    if cd.len() < 2 {
        return Err(skip("too_few_unique_labels"));
    }
    let main_pose = ctx.image(p.main).pose;
    let (before, after) = imagined_relation(
        &ctx.center(cd[0]),
        &ctx.center(cd[1]),
        &ctx.center(p.ids[0]),
        Some(&ctx.center(p.ids[1])),
        &main_pose,
        &ctx.up,
        &ctx.rel,
    )
    .map_err(skip_of)?;
    if !informative(&after) {
        return Err(skip("indistinguishable"));
    }
    let mut b = Bindings::new();
    bind(&mut b, "label_A", ctx.label(p.ids[0]));
    bind(&mut b, "label_B", ctx.label(p.ids[1]));
    bind(&mut b, "label_C", ctx.label(cd[0]));
    bind(&mut b, "label_D", ctx.label(cd[1]));
    imag_bindings(&mut b, &before, &after);
    let answer = relation_answer(&three_axes(&after), qa_type, String::new(), rng);
    Ok(Draft {
        frames: p.frames,
        bindings: b,
        marks: p.marks,
        answer,
    })
}

fn jitter_box<R: Rng>(b: [i64; 4], rng: &mut R) -> [i64; 4] {
    let (w, h) = (b[2] - b[0], b[3] - b[1]);
    let dx = rng.gen_range(100..=300) * if rng.gen_bool(0.5) { 1 } else { -1 };
    let dy = rng.gen_range(100..=300) * if rng.gen_bool(0.5) { 1 } else { -1 };
    let x0 = (b[0] + dx).clamp(0, 1000 - w);
    let y0 = (b[1] + dy).clamp(0, 1000 - h);
    [x0, y0, x0 + w, y0 + h]
}

fn pos_match<R: Rng>(ctx: &Ctx, qa_type: QaType, rng: &mut R) -> Result<Draft, Skip> {
    let candidates: Vec<_> = ctx.records.objects.iter().filter(|o| o.frame_indices.len() >= 2).collect();
    let obj = candidates.choose(rng).ok_or_else(|| skip("single_view"))?;
    let m = position_match_sample(obj, ctx.records, rng).map_err(skip_of)?;
    let (ia, ib) = (ctx.image(m.frame_a), ctx.image(m.frame_b));
    let gt = normalized_box(ib, m.bbox_b);
    let mut b = Bindings::new();
    bind(&mut b, "label_A", ctx.label(m.object_id));
    bind(&mut b, "bbox_A", box_text(normalized_box(ia, m.bbox_a)));
    bind(&mut b, "bbox_B", box_text(gt));
    let answer = match qa_type {
        QaType::Sentence => sentence(),
        QaType::Fill => AnswerSpec::Fill {
            text: box_text(gt),
            gt: None,
        },
        QaType::Select => {
            let mut others: Vec<String> = ib
                .visible_objects
                .iter()
                .filter(|o| o.object_id != m.object_id)
                .map(|o| box_text(normalized_box(ib, o.bbox2d)))
                .collect();
            others.shuffle(rng);
            others.extend((0..8).map(|_| box_text(jitter_box(gt, rng))));
            choice_answer(box_text(gt), others, 4, rng)?
        }
    };
    let mark = MarkSpec {
        role: 'A',
        frame: m.frame_a,
        kind: MarkKind::Bbox,
        pixels: m.bbox_a.iter().map(|&p| round_to(p, 0.1)).collect(),
        color: MarkColor::Red,
    };
    Ok(Draft {
        frames: vec![m.frame_a, m.frame_b],
        bindings: b,
        marks: vec![mark],
        answer,
    })
}

fn camera_text(u: i64, v: i64, depth: f64) -> String {
    format!("({u}, {v}), {}", meters(depth))
}

fn cam_motion<R: Rng>(ctx: &Ctx, qa_type: QaType, rng: &mut R) -> Result<Draft, Skip> {
    let n = ctx.records.images.len();
    if n < 2 {
        return Err(skip("single_view"));
    }
    let (i, j) = task::sample_pair(rng, n);
    let (ia, ib) = (&ctx.records.images[i], &ctx.records.images[j]);
    let pos = camera_pose_projection(&ia.pose, &ia.camera, &ib.pose).map_err(skip_of)?;
    let (u, v) = (pos.u.round() as i64, pos.v.round() as i64);
    let depth = round_to(pos.depth, ctx.rel.round_step);
    if !(depth > 0.0) {
        return Err(skip("non_positive_value"));
    }
    let mut b = Bindings::new();
    bind(&mut b, "u", u.to_string());
    bind(&mut b, "v", v.to_string());
    bind(&mut b, "depth", meters(depth));
    let gt = camera_text(u, v, depth);
    let answer = match qa_type {
        QaType::Sentence => sentence(),
        QaType::Fill => AnswerSpec::Fill { text: gt, gt: None },
        QaType::Select => {
            let (depths, correct) = make_numeric_options(depth, ctx.rel.round_step, rng);
            let others: Vec<String> = depths
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != correct)
                .map(|(_, &d)| {
                    let (du, dv) = loop {
                        let du = rng.gen_range(0..=1000);
                        let dv = rng.gen_range(0..=1000);
                        if (du - u).abs().max((dv - v).abs()) >= 100 {
                            break (du, dv);
                        }
                    };
                    camera_text(du, dv, d)
                })
                .collect();
            choice_answer(gt, others, 4, rng)?
        }
    };
    Ok(Draft {
        frames: vec![ia.frame_index, ib.frame_index],
        bindings: b,
        marks: Vec::new(),
        answer,
    })
}

fn view_chg<R: Rng>(ctx: &Ctx, qa_type: QaType, rng: &mut R) -> Result<Draft, Skip> {
    let ia = ctx.pick_image(1, rng)?;
    let shared: Vec<(&ImageRecord, &ObjectInView, &ObjectInView)> = ctx
        .records
        .images
        .iter()
        .filter(|i| i.frame_index != ia.frame_index)
        .flat_map(|ib| {
            ia.visible_objects
                .iter()
                .filter_map(move |oa| ib.object(oa.object_id).map(|ob| (ib, oa, ob)))
        })
        .collect();
    let &(ib, oa, ob) = shared.choose(rng).ok_or_else(|| skip("no_shared_object"))?;
    let motion = view_change(&ia.pose, &ib.pose, &ctx.rel);
    if motion.as_array().iter().all(|&x| x == 0.0) {
        return Err(skip("no_motion"));
    }
    let steps = format_motion(&motion);
    let mut b = Bindings::new();
    bind(&mut b, "label_A", ctx.label(oa.object_id));
    bind(&mut b, "region_before", region(ia, oa.bbox_center()));
    bind(&mut b, "region_after", region(ib, ob.bbox_center()));
    bind(&mut b, "steps", steps.clone());
    let answer = match qa_type {
        QaType::Sentence => sentence(),
        _ => AnswerSpec::Fill { text: steps, gt: None },
    };
    Ok(Draft {
        frames: vec![ia.frame_index, ib.frame_index],
        bindings: b,
        marks: Vec::new(),
        answer,
    })
}

fn volume<R: Rng>(ctx: &Ctx, qa_type: QaType, rng: &mut R) -> Result<Draft, Skip> {
    let img = ctx.pick_image(1, rng)?;
    let a = ctx.pick_objects(img, 1, rng)[0];
    let dims = object_dims(ctx.obb(a.object_id));
    let int = |x: f64| format_number(x.round(), 0);
    let mut b = Bindings::new();
    bind(&mut b, "label_A", ctx.label(a.object_id));
    bind(&mut b, "height", int(dims.height));
    bind(&mut b, "length", int(dims.length));
    bind(&mut b, "width", int(dims.width));
    bind(&mut b, "volume", int(dims.volume));
    let answer = match qa_type {
        QaType::Sentence => sentence(),
        _ => numeric_answer(dims.volume, 1.0, "cm3", qa_type, rng)?,
    };
    Ok(Draft {
        frames: single(img.frame_index),
        bindings: b,
        marks: vec![point_mark('A', img.frame_index, img, a, MarkColor::Red)],
        answer,
    })
}

fn obj_frame_loc<R: Rng>(ctx: &Ctx, qa_type: QaType, rng: &mut R) -> Result<Draft, Skip> {
    let main = ctx.pick_image(1, rng)?;
    let a = ctx.pick_objects(main, 1, rng)[0];
    let frames = ctx.views(main.frame_index, &[], &[a.object_id], false, rng)?;
    let hits: Vec<String> = frames
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, &f)| ctx.image(f).object(a.object_id).is_some())
        .map(|(k, _)| (k + 1).to_string())
        .collect();
    if hits.is_empty() {
        return Err(skip("single_view"));
    }
    let listed = hits.join(", ");
    let mut b = Bindings::new();
    bind(&mut b, "label_A", ctx.label(a.object_id));
    bind(&mut b, "n_images", (frames.len() - 1).to_string());
    bind(&mut b, "frames", listed.clone());
    let answer = match qa_type {
        QaType::Sentence => sentence(),
        _ => AnswerSpec::Fill { text: listed, gt: None },
    };
    Ok(Draft {
        frames,
        bindings: b,
        marks: vec![point_mark('A', main.frame_index, main, a, MarkColor::Red)],
        answer,
    })
}

fn appear_order<R: Rng>(ctx: &Ctx, qa_type: QaType, rng: &mut R) -> Result<Draft, Skip> {
    let n = rng.gen_range(3..=5);
    let mut frames: Vec<FrameIndex> = ctx
        .records
        .images
        .choose_multiple(rng, n)
        .map(|i| i.frame_index)
        .collect();
    if frames.len() < 3 {
        return Err(skip("too_few_views"));
    }
    frames.sort_unstable();
    let seen: Vec<crate::visibility::ObjectRecord> = ctx
        .records
        .objects
        .iter()
        .map(|o| crate::visibility::ObjectRecord {
            object_id: o.object_id,
            label: o.label.clone(),
            frame_indices: o.frame_indices.iter().copied().filter(|f| frames.contains(f)).collect(),
        })
        .filter(|o| !o.frame_indices.is_empty())
        .collect();
    let mut label_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for o in &seen {
        *label_counts.entry(o.label.as_str()).or_default() += 1;
    }
    let order = task::appearance_order(&seen);
    // one object per first-appearance frame, labels unambiguous
    let mut by_frame: BTreeMap<FrameIndex, Vec<ObjectId>> = BTreeMap::new();
    for (id, f) in order {
        if label_counts[ctx.label(id)] == 1 {
            by_frame.entry(f).or_default().push(id);
        }
    }
    if by_frame.len() < 3 {
        return Err(skip("too_few_objects"));
    }
    let keys: Vec<FrameIndex> = by_frame.keys().copied().collect();
    let mut chosen_frames: Vec<FrameIndex> = keys.choose_multiple(rng, 3).copied().collect();
    chosen_frames.sort_unstable();
    let chosen: Vec<ObjectId> = chosen_frames
        .iter()
        .map(|f| *by_frame[f].choose(rng).expect("non-empty"))
        .collect();
    let order_text = chosen.iter().map(|&id| ctx.label(id)).collect::<Vec<_>>().join(", ");
    let mut listed: Vec<&str> = chosen.iter().map(|&id| ctx.label(id)).collect();
    listed.shuffle(rng);
    let mut b = Bindings::new();
    bind(&mut b, "labels", listed.join(", "));
    bind(&mut b, "order", order_text.clone());
    let answer = match qa_type {
        QaType::Sentence => sentence(),
        _ => AnswerSpec::Fill {
            text: order_text,
            gt: None,
        },
    };
    Ok(Draft {
        frames,
        bindings: b,
        marks: Vec::new(),
        answer,
    })
}

fn obj_count<R: Rng>(ctx: &Ctx, qa_type: QaType, rng: &mut R) -> Result<Draft, Skip> {
    let labels: Vec<&str> = ctx.scene.objects.iter().map(|o| o.label.as_str()).collect();
    let counts = object_count(&labels);
    let (label, &count) = counts
        .iter()
        .collect::<Vec<_>>()
        .choose(rng)
        .copied()
        .ok_or_else(|| skip("no_repeated_label"))?;
    let ids: Vec<ObjectId> = ctx
        .scene
        .objects
        .iter()
        .filter(|o| &o.label == label)
        .map(|o| o.object_id)
        .collect();
    let showing: Vec<FrameIndex> = ctx
        .records
        .images
        .iter()
        .filter(|i| ids.iter().any(|&id| i.object(id).is_some()))
        .map(|i| i.frame_index)
        .collect();
    let &main = showing.choose(rng).ok_or_else(|| skip("not_visible"))?;
    let frames = ctx.views(main, &[], &ids, true, rng)?;
    let mut b = Bindings::new();
    bind(&mut b, "label_A", label.as_str());
    bind(&mut b, "count", count.to_string());
    let answer = match qa_type {
        QaType::Sentence => sentence(),
        _ => numeric_answer(count as f64, 1.0, "count", qa_type, rng)?,
    };
    Ok(Draft {
        frames,
        bindings: b,
        marks: Vec::new(),
        answer,
    })
}

fn room_size<R: Rng>(ctx: &Ctx, qa_type: QaType, rng: &mut R) -> Result<Draft, Skip> {
    let area = task::room_area(ctx.scene.mesh.vertices(), &ctx.room).map_err(skip_of)?;
    let main = ctx.records.images.choose(rng).ok_or_else(|| skip("no_images"))?;
    let frames = ctx.views(main.frame_index, &[], &[], false, rng)?;
    let mut b = Bindings::new();
    bind(&mut b, "area", meters(round_to(area, 0.1)));
    let answer = match qa_type {
        QaType::Sentence => sentence(),
        _ => numeric_answer(area, 0.1, "m2", qa_type, rng)?,
    };
    Ok(Draft {
        frames,
        bindings: b,
        marks: Vec::new(),
        answer,
    })
}
