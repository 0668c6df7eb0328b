//! Rotated 3D overlap and KITTI-style detection metrics.
//!
//! All precision-based metrics share one pipeline. Detections are ranked by score.
//! Each one is greedily matched to the best still-unmatched ground truth of its
//! class in the same frame. The resulting precision/recall curve is integrated
//! with 11- or 40-point interpolation. Only the match criterion differs between
//! AP_3D (3D IoU), ALP (bottom-center distance) and AOS (2D IoU, with each true
//! positive weighted by its orientation similarity).

use nalgebra::Point2;
use serde::{Deserialize, Serialize};

use crate::geometry::{Box2D, Box3D};

/// Clip tolerance (meters) for the half-plane test in polygon clipping.
pub const CLIP_TOLERANCE: f64 = 1e-9;

fn cross(o: &Point2<f64>, a: &Point2<f64>, b: &Point2<f64>) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Shoelace signed area; positive for counter-clockwise order.
pub fn signed_area(poly: &[Point2<f64>]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (&poly[i], &poly[(i + 1) % n]);
            a.x * b.y - b.x * a.y
        })
        .sum::<f64>()
}

fn ccw(poly: &[Point2<f64>]) -> Vec<Point2<f64>> {
    let mut v = poly.to_vec();
    if signed_area(&v) < 0.0 {
        v.reverse();
    }
    v
}

fn edge_intersection(s: &Point2<f64>, e: &Point2<f64>, a: &Point2<f64>, b: &Point2<f64>) -> Point2<f64> {
    let ds = cross(a, b, s);
    let de = cross(a, b, e);
    let denom = ds - de;
    if denom.abs() < f64::EPSILON {
        return *e;
    }
    let t = ds / denom;
    Point2::from(s.coords + (e.coords - s.coords) * t)
}

/// Sutherland–Hodgman clip of a convex `subject` by a convex `clip` polygon.
/// Orientation of either input is normalized first. Collinear vertices are kept.
pub fn clip_convex(subject: &[Point2<f64>], clip: &[Point2<f64>]) -> Vec<Point2<f64>> {
    let clip = ccw(clip);
    let mut output = ccw(subject);
    let n = clip.len();
    for i in 0..n {
        if output.is_empty() {
            break;
        }
        let (a, b) = (clip[i], clip[(i + 1) % n]);
        let scale = (b - a).norm().max(1.0);
        let inside = |p: &Point2<f64>| cross(&a, &b, p) >= -CLIP_TOLERANCE * scale;
        let input = std::mem::take(&mut output);
        let m = input.len();
        for j in 0..m {
            let cur = input[j];
            let prev = input[(j + m - 1) % m];
            match (inside(&prev), inside(&cur)) {
                (true, true) => output.push(cur),
                (true, false) => output.push(edge_intersection(&prev, &cur, &a, &b)),
                (false, true) => {
                    output.push(edge_intersection(&prev, &cur, &a, &b));
                    output.push(cur);
                }
                (false, false) => {}
            }
        }
    }
    output
}

/// Overlap area of two convex footprints.
pub fn bev_intersection_area(a: &[Point2<f64>], b: &[Point2<f64>]) -> f64 {
    signed_area(&clip_convex(a, b)).abs()
}

/// Intersection volume: footprint overlap times the overlap of `[y − h, y]`.
pub fn intersection_volume(a: &Box3D, b: &Box3D) -> f64 {
    let y_overlap = (a.y.min(b.y) - (a.y - a.h).max(b.y - b.h)).max(0.0);
    if y_overlap <= 0.0 {
        return 0.0;
    }
    bev_intersection_area(&a.bev_corners(), &b.bev_corners()) * y_overlap
}

pub fn iou3d(a: &Box3D, b: &Box3D) -> f64 {
    let inter = intersection_volume(a, b);
    let union = a.volume() + b.volume() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Bird's-eye-view IoU (footprints only).
pub fn iou_bev(a: &Box3D, b: &Box3D) -> f64 {
    let inter = bev_intersection_area(&a.bev_corners(), &b.bev_corners());
    let union = a.w * a.l + b.w * b.l - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// Euclidean distance between bottom-face centers.
pub fn center_distance(a: &Box3D, b: &Box3D) -> f64 {
    (a.location() - b.location()).norm()
}

/// `(1 + cos Δα) / 2`.
pub fn orientation_similarity(alpha_det: f64, alpha_gt: f64) -> f64 {
    (1.0 + (alpha_det - alpha_gt).cos()) / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Moderate,
    Hard,
    Ignored,
}

impl Difficulty {
    pub const LEVELS: [Difficulty; 3] = [Difficulty::Easy, Difficulty::Moderate, Difficulty::Hard];

    pub fn name(self) -> &'static str {
        match self {
            Difficulty::Easy => "Easy",
            Difficulty::Moderate => "Moderate",
            Difficulty::Hard => "Hard",
            Difficulty::Ignored => "Ignored",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DifficultyLevel {
    pub min_height: f64,
    pub max_occlusion: i32,
    pub max_truncation: f64,
}

impl DifficultyLevel {
    fn admits(&self, gt: &GroundTruth) -> bool {
        gt.box2d.h >= self.min_height && gt.occlusion <= self.max_occlusion && gt.truncation <= self.max_truncation
    }
}

/// Difficulty thresholds. Defaults follow the KITTI devkit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DifficultyTable {
    pub easy: DifficultyLevel,
    pub moderate: DifficultyLevel,
    pub hard: DifficultyLevel,
}

impl Default for DifficultyTable {
    fn default() -> Self {
        Self {
            easy: DifficultyLevel {
                min_height: 40.0,
                max_occlusion: 0,
                max_truncation: 0.15,
            },
            moderate: DifficultyLevel {
                min_height: 25.0,
                max_occlusion: 1,
                max_truncation: 0.30,
            },
            hard: DifficultyLevel {
                min_height: 25.0,
                max_occlusion: 2,
                max_truncation: 0.50,
            },
        }
    }
}

impl DifficultyTable {
    pub fn level(&self, d: Difficulty) -> Option<&DifficultyLevel> {
        match d {
            Difficulty::Easy => Some(&self.easy),
            Difficulty::Moderate => Some(&self.moderate),
            Difficulty::Hard => Some(&self.hard),
            Difficulty::Ignored => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub box3d: Box3D,
    pub box2d: Box2D,
    pub alpha: f64,
    pub class_name: String,
    pub truncation: f64,
    pub occlusion: i32,
}

/// Easiest level whose thresholds the object satisfies.
pub fn difficulty_of(gt: &GroundTruth, table: &DifficultyTable) -> Difficulty {
    Difficulty::LEVELS
        .into_iter()
        .find(|d| table.level(*d).is_some_and(|l| l.admits(gt)))
        .unwrap_or(Difficulty::Ignored)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub box3d: Box3D,
    pub box2d: Box2D,
    pub alpha: f64,
    pub class_name: String,
    pub score: f64,
}

/// Ground truths and detections of one image.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameData {
    pub gts: Vec<GroundTruth>,
    pub dets: Vec<DetectionResult>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MatchCriterion {
    /// 3D IoU at or above the threshold.
    Iou3d(f64),
    /// 2D IoU at or above the threshold.
    Iou2d(f64),
    /// Bottom-center distance at or below the threshold (meters).
    CenterDistance(f64),
}

impl MatchCriterion {
    /// Match affinity (higher is better), `None` when the pair does not qualify.
    pub fn affinity(&self, det: &DetectionResult, gt: &GroundTruth) -> Option<f64> {
        match *self {
            MatchCriterion::Iou3d(t) => Some(iou3d(&det.box3d, &gt.box3d)).filter(|v| *v >= t && *v > 0.0),
            MatchCriterion::Iou2d(t) => Some(det.box2d.iou(&gt.box2d)).filter(|v| *v >= t && *v > 0.0),
            MatchCriterion::CenterDistance(t) => {
                let d = center_distance(&det.box3d, &gt.box3d);
                (d <= t).then_some(-d)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Interpolation {
    #[default]
    ElevenPoint,
    FortyPoint,
}

impl Interpolation {
    pub fn recall_levels(self) -> Vec<f64> {
        match self {
            Interpolation::ElevenPoint => (0..=10).map(|i| i as f64 / 10.0).collect(),
            Interpolation::FortyPoint => (1..=40).map(|i| i as f64 / 40.0).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub class_name: String,
    pub difficulty: Difficulty,
    pub criterion: MatchCriterion,
    pub interpolation: Interpolation,
    pub table: DifficultyTable,
}

impl EvalOptions {
    pub fn new(class_name: impl Into<String>, difficulty: Difficulty, criterion: MatchCriterion) -> Self {
        Self {
            class_name: class_name.into(),
            difficulty,
            criterion,
            interpolation: Interpolation::default(),
            table: DifficultyTable::default(),
        }
    }

    pub fn with_interpolation(mut self, interpolation: Interpolation) -> Self {
        self.interpolation = interpolation;
        self
    }

    pub fn with_table(mut self, table: DifficultyTable) -> Self {
        self.table = table;
        self
    }
}

/// One ranked detection on the precision/recall curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub score: f64,
    pub recall: f64,
    pub precision: f64,
    /// Orientation-weighted precision (sum of similarities over rank).
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
    pub interpolation: Interpolation,
}

impl PrCurve {
    fn integrate(&self, value: impl Fn(&PrPoint) -> f64) -> f64 {
        let levels = self.interpolation.recall_levels();
        let total: f64 = levels
            .iter()
            .map(|r| {
                self.points
                    .iter()
                    .filter(|p| p.recall >= r - 1e-12)
                    .map(&value)
                    .fold(0.0, f64::max)
            })
            .sum();
        total / levels.len() as f64
    }

    pub fn average_precision(&self) -> f64 {
        self.integrate(|p| p.precision)
    }

    pub fn orientation_score(&self) -> f64 {
        self.integrate(|p| p.similarity)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub ap: f64,
    /// Orientation similarity integrated like `ap` (AOS when matching on 2D IoU).
    pub aos: f64,
    pub num_gt: usize,
    pub num_tp: usize,
    pub num_fp: usize,
    pub curve: PrCurve,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Outcome {
    Tp(f64),
    Fp,
}

fn gt_state(gt: &GroundTruth, opts: &EvalOptions) -> GtState {
    if gt.class_name != opts.class_name {
        return GtState::Other;
    }
    let d = difficulty_of(gt, &opts.table);
    if d != Difficulty::Ignored && d <= opts.difficulty {
        GtState::Valid
    } else {
        GtState::Ignored
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum GtState {
    Valid,
    Ignored,
    Other,
}

// Ranked outcomes of one frame and its count of valid ground truths.
fn match_frame(frame: &FrameData, opts: &EvalOptions) -> (Vec<(f64, Outcome)>, usize) {
    let states: Vec<GtState> = frame.gts.iter().map(|g| gt_state(g, opts)).collect();
    let num_valid = states.iter().filter(|s| **s == GtState::Valid).count();
    let min_height = opts.table.level(opts.difficulty).map_or(0.0, |l| l.min_height);

    let mut order: Vec<usize> = (0..frame.dets.len())
        .filter(|&i| frame.dets[i].class_name == opts.class_name && frame.dets[i].box2d.h >= min_height)
        .collect();
    order.sort_by(|&a, &b| frame.dets[b].score.total_cmp(&frame.dets[a].score));

    let mut taken = vec![false; frame.gts.len()];
    let mut out = Vec::with_capacity(order.len());
    for di in order {
        let det = &frame.dets[di];
        let mut best: Option<(usize, f64)> = None;
        let mut hits_ignored = false;
        for (gi, gt) in frame.gts.iter().enumerate() {
            let Some(aff) = (match states[gi] {
                GtState::Other => None,
                _ => opts.criterion.affinity(det, gt),
            }) else {
                continue;
            };
            match states[gi] {
                GtState::Valid if !taken[gi] => {
                    if best.is_none_or(|(_, b)| aff > b) {
                        best = Some((gi, aff));
                    }
                }
                GtState::Ignored => hits_ignored = true,
                _ => {}
            }
        }
        match best {
            Some((gi, _)) => {
                taken[gi] = true;
                let s = orientation_similarity(det.alpha, frame.gts[gi].alpha);
                out.push((det.score, Outcome::Tp(s)));
            }
            None if hits_ignored => {}
            None => out.push((det.score, Outcome::Fp)),
        }
    }
    (out, num_valid)
}

/// Runs matching over all frames and builds the ranked PR curve.
pub fn evaluate(frames: &[FrameData], opts: &EvalOptions) -> EvalReport {
    let mut ranked = Vec::new();
    let mut num_gt = 0;
    for f in frames {
        let (outcomes, n) = match_frame(f, opts);
        ranked.extend(outcomes);
        num_gt += n;
    }
    // stable: ties keep frame order, then in-frame rank
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut points = Vec::with_capacity(ranked.len());
    let (mut tp, mut fp, mut sim) = (0usize, 0usize, 0.0);
    for (score, outcome) in &ranked {
        match outcome {
            Outcome::Tp(s) => {
                tp += 1;
                sim += s;
            }
            Outcome::Fp => fp += 1,
        }
        let k = (tp + fp) as f64;
        points.push(PrPoint {
            score: *score,
            recall: if num_gt == 0 { 0.0 } else { tp as f64 / num_gt as f64 },
            precision: tp as f64 / k,
            similarity: sim / k,
        });
    }
    let curve = PrCurve {
        points,
        interpolation: opts.interpolation,
    };
    let (ap, aos) = if num_gt == 0 {
        (0.0, 0.0)
    } else {
        (curve.average_precision(), curve.orientation_score())
    };
    EvalReport {
        ap,
        aos,
        num_gt,
        num_tp: tp,
        num_fp: fp,
        curve,
    }
}

/// AP with true positives defined by `criterion`.
pub fn average_precision(frames: &[FrameData], opts: &EvalOptions) -> f64 {
    evaluate(frames, opts).ap
}

/// Average localization precision: AP with a bottom-center distance criterion.
pub fn alp(frames: &[FrameData], class_name: &str, distance_m: f64, difficulty: Difficulty) -> f64 {
    let opts = EvalOptions::new(class_name, difficulty, MatchCriterion::CenterDistance(distance_m));
    evaluate(frames, &opts).ap
}

/// `(AP_2D, AOS)` with the 2D IoU ≥ 0.5 criterion.
pub fn aos(frames: &[FrameData], class_name: &str, difficulty: Difficulty) -> (f64, f64) {
    let opts = EvalOptions::new(class_name, difficulty, MatchCriterion::Iou2d(0.5));
    let r = evaluate(frames, &opts);
    (r.ap, r.aos)
}

/// Fraction of valid ground truths with at least one same-class candidate meeting
/// `criterion`. Candidates are not consumed.
pub fn recall(frames: &[FrameData], opts: &EvalOptions) -> f64 {
    let (mut hit, mut total) = (0usize, 0usize);
    for f in frames {
        for gt in &f.gts {
            if gt_state(gt, opts) != GtState::Valid {
                continue;
            }
            total += 1;
            if f
                .dets
                .iter()
                .any(|d| d.class_name == opts.class_name && opts.criterion.affinity(d, gt).is_some())
            {
                hit += 1;
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        hit as f64 / total as f64
    }
}

/// Fraction of `gts` with some guidance whose bottom center lies within `threshold_m`.
pub fn recall_loc(guidances: &[Box3D], gts: &[Box3D], threshold_m: f64) -> f64 {
    recall_boxes(guidances, gts, |g, t| center_distance(g, t) <= threshold_m)
}

/// Fraction of `gts` with some guidance at 3D IoU ≥ `iou_threshold`.
pub fn recall_3d(guidances: &[Box3D], gts: &[Box3D], iou_threshold: f64) -> f64 {
    recall_boxes(guidances, gts, |g, t| iou3d(g, t) >= iou_threshold)
}

fn recall_boxes(guidances: &[Box3D], gts: &[Box3D], hit: impl Fn(&Box3D, &Box3D) -> bool) -> f64 {
    if gts.is_empty() {
        return 0.0;
    }
    let n = gts.iter().filter(|t| guidances.iter().any(|g| hit(g, t))).count();
    n as f64 / gts.len() as f64
}
