//! Refinement of a guidance cuboid toward the ground truth.
//!
//! Two codecs live here. The regression codec ([`encode_residual`]) normalizes
//! offsets by the box size and encodes sizes as log-ratios. The interval codec
//! works on raw differences `Δd = d_gt − d_guidance` and bins each dimension into
//! `2N + 1` classes centered at `0, ±σ, …, ±Nσ`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Box2D, Box3D};
use crate::guidance::Guidance;

/// Clip applied to predicted probabilities before taking logs.
pub const BCE_EPS: f64 = 1e-7;

/// Sizes of shifted candidates never drop below this (meters).
pub const MIN_CANDIDATE_SIZE: f64 = 1e-3;

/// Minimum 2D IoU between a detection and a projected ground truth for a match.
pub const LABEL_MATCH_IOU: f64 = 0.5;

/// Box descriptor in canonical `(w, h, l, x, y, z, θ)` order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dim {
    W,
    H,
    L,
    X,
    Y,
    Z,
    Theta,
}

impl Dim {
    pub const ALL: [Dim; 7] = [Dim::W, Dim::H, Dim::L, Dim::X, Dim::Y, Dim::Z, Dim::Theta];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Dim::W => "w",
            Dim::H => "h",
            Dim::L => "l",
            Dim::X => "x",
            Dim::Y => "y",
            Dim::Z => "z",
            Dim::Theta => "theta",
        }
    }

    pub fn get(self, b: &Box3D) -> f64 {
        b.to_array()[self.index()]
    }
}

impl fmt::Display for Dim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Regression-codec residual.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Residual {
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    pub dl: f64,
    pub dw: f64,
    pub dh: f64,
    pub dtheta: f64,
}

pub fn encode_residual(guidance: &Box3D, gt: &Box3D) -> Residual {
    let diag = (guidance.l * guidance.l + guidance.w * guidance.w).sqrt();
    Residual {
        dx: (gt.x - guidance.x) / diag,
        dy: (gt.y - guidance.y) / diag,
        dz: (gt.z - guidance.z) / guidance.h,
        dl: (gt.l / guidance.l).ln(),
        dw: (gt.w / guidance.w).ln(),
        dh: (gt.h / guidance.h).ln(),
        dtheta: wrap_angle(gt.theta - guidance.theta),
    }
}

pub fn decode_residual(guidance: &Box3D, r: &Residual) -> Box3D {
    let diag = (guidance.l * guidance.l + guidance.w * guidance.w).sqrt();
    Box3D {
        w: guidance.w * r.dw.exp(),
        h: guidance.h * r.dh.exp(),
        l: guidance.l * r.dl.exp(),
        x: guidance.x + r.dx * diag,
        y: guidance.y + r.dy * diag,
        z: guidance.z + r.dz * guidance.h,
        theta: wrap_angle(guidance.theta + r.dtheta),
    }
}

/// `d_gt − d_guidance` per dimension; the angle difference is wrapped.
pub fn raw_deltas(guidance: &Box3D, gt: &Box3D) -> [f64; 7] {
    let g = guidance.to_array();
    let t = gt.to_array();
    let mut d: [f64; 7] = std::array::from_fn(|i| t[i] - g[i]);
    d[Dim::Theta.index()] = wrap_angle(d[Dim::Theta.index()]);
    d
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimInterval {
    pub sigma: f64,
    pub n_half: usize,
}

impl DimInterval {
    pub fn class_count(&self) -> usize {
        2 * self.n_half + 1
    }

    /// Center of class `idx`; index `n_half` is the zero class.
    pub fn center(&self, idx: usize) -> f64 {
        (idx as f64 - self.n_half as f64) * self.sigma
    }

    /// Nearest center, clamped to the extreme classes.
    pub fn classify(&self, delta: f64) -> usize {
        let k = (delta / self.sigma).round();
        let n = self.n_half as f64;
        (k.clamp(-n, n) + n) as usize
    }
}

/// Interval grid for all seven dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntervalSpec {
    pub w: DimInterval,
    pub h: DimInterval,
    pub l: DimInterval,
    pub x: DimInterval,
    pub y: DimInterval,
    pub z: DimInterval,
    pub theta: DimInterval,
}

impl Default for IntervalSpec {
    /// Car statistics: σ = (0.10, 0.13, 0.41, 0.48, 0.10, 1.65, 0.05), N = 5 except x and z with 10.
    fn default() -> Self {
        let d = |sigma, n_half| DimInterval { sigma, n_half };
        Self {
            w: d(0.10, 5),
            h: d(0.13, 5),
            l: d(0.41, 5),
            x: d(0.48, 10),
            y: d(0.10, 5),
            z: d(1.65, 10),
            theta: d(0.05, 5),
        }
    }
}

impl IntervalSpec {
    pub fn from_dims(dims: [DimInterval; 7]) -> Result<Self> {
        let s = Self {
            w: dims[0],
            h: dims[1],
            l: dims[2],
            x: dims[3],
            y: dims[4],
            z: dims[5],
            theta: dims[6],
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for d in Dim::ALL {
            let di = self.get(d);
            if !(di.sigma > 0.0 && di.sigma.is_finite()) || di.n_half < 1 {
                return Err(Error::Config(format!(
                    "interval for `{d}` needs sigma > 0 and n_half >= 1 (got {} / {})",
                    di.sigma, di.n_half
                )));
            }
        }
        Ok(())
    }

    pub fn get(&self, d: Dim) -> &DimInterval {
        match d {
            Dim::W => &self.w,
            Dim::H => &self.h,
            Dim::L => &self.l,
            Dim::X => &self.x,
            Dim::Y => &self.y,
            Dim::Z => &self.z,
            Dim::Theta => &self.theta,
        }
    }

    pub fn dims(&self) -> [DimInterval; 7] {
        Dim::ALL.map(|d| *self.get(d))
    }

    /// Sum of class counts over all dimensions.
    pub fn total_classes(&self) -> usize {
        Dim::ALL.iter().map(|d| self.get(*d).class_count()).sum()
    }
}

pub fn classify_delta(spec: &IntervalSpec, delta: f64, dim: Dim) -> usize {
    spec.get(dim).classify(delta)
}

/// Guidance moved by `amount` along one dimension. Sizes shift additively.
pub fn shift_box(b: &Box3D, dim: Dim, amount: f64) -> Box3D {
    let mut p = b.to_array();
    p[dim.index()] += amount;
    let mut out = Box3D {
        w: p[0],
        h: p[1],
        l: p[2],
        x: p[3],
        y: p[4],
        z: p[5],
        theta: wrap_angle(p[6]),
    };
    out.w = out.w.max(MIN_CANDIDATE_SIZE);
    out.h = out.h.max(MIN_CANDIDATE_SIZE);
    out.l = out.l.max(MIN_CANDIDATE_SIZE);
    out
}

/// One shifted copy of the guidance per class of each dimension, in spec order.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedCandidates {
    pub per_dim: [Vec<Box3D>; 7],
}

impl ShiftedCandidates {
    pub fn get(&self, d: Dim) -> &[Box3D] {
        &self.per_dim[d.index()]
    }

    pub fn len(&self) -> usize {
        self.per_dim.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn shifted_candidates(guidance: &Box3D, spec: &IntervalSpec) -> ShiftedCandidates {
    ShiftedCandidates {
        per_dim: Dim::ALL.map(|d| {
            let di = spec.get(d);
            (0..di.class_count())
                .map(|k| shift_box(guidance, d, di.center(k)))
                .collect()
        }),
    }
}

/// Soft target from 3D overlap: 0 below 0.25, 1 above 0.75, linear in between.
pub fn quality_label(ov: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&ov) {
        return Err(Error::OutOfRange {
            value: ov,
            min: 0.0,
            max: 1.0,
        });
    }
    Ok(if ov > 0.75 {
        1.0
    } else if ov < 0.25 {
        0.0
    } else {
        2.0 * ov - 0.5
    })
}

fn clip_probability(p: f64) -> f64 {
    p.clamp(BCE_EPS, 1.0 - BCE_EPS)
}

/// Binary cross-entropy against a soft target.
pub fn quality_bce(p: f64, q: f64) -> f64 {
    let p = clip_probability(p);
    -(q * p.ln() + (1.0 - q) * (1.0 - p).ln())
}

/// `∂L/∂p` of [`quality_bce`] inside the clip range (zero outside it).
pub fn quality_bce_grad(p: f64, q: f64) -> f64 {
    if !(BCE_EPS..=1.0 - BCE_EPS).contains(&p) {
        return 0.0;
    }
    -q / p + (1.0 - q) / (1.0 - p)
}

/// Per-dimension q-value targets.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalLabels {
    pub per_dim: [Vec<f64>; 7],
    pub matched: bool,
}

impl IntervalLabels {
    pub fn unmatched(spec: &IntervalSpec) -> Self {
        Self {
            per_dim: Dim::ALL.map(|d| vec![0.0; spec.get(d).class_count()]),
            matched: false,
        }
    }

    pub fn get(&self, d: Dim) -> &[f64] {
        &self.per_dim[d.index()]
    }
}

/// Index of the ground truth whose projected box overlaps `det` best, if any reaches `min_iou`.
pub fn match_ground_truth(det: &Box2D, gts: &[Box2D], min_iou: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, g) in gts.iter().enumerate() {
        let iou = det.iou(g);
        if iou >= min_iou && best.is_none_or(|(_, b)| iou > b) {
            best = Some((i, iou));
        }
    }
    best.map(|(i, _)| i)
}

pub fn make_interval_labels<F>(guidance: &Box3D, gt: Option<&Box3D>, spec: &IntervalSpec, iou_fn: F) -> IntervalLabels
where
    F: Fn(&Box3D, &Box3D) -> f64,
{
    let Some(gt) = gt else {
        return IntervalLabels::unmatched(spec);
    };
    let candidates = shifted_candidates(guidance, spec);
    let per_dim = Dim::ALL.map(|d| {
        candidates
            .get(d)
            .iter()
            .map(|c| quality_label(iou_fn(c, gt).clamp(0.0, 1.0)).unwrap_or(0.0))
            .collect()
    });
    IntervalLabels { per_dim, matched: true }
}

/// Classifier confidences per dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalScores {
    pub per_dim: [Vec<f64>; 7],
}

impl IntervalScores {
    /// Splits a flat vector laid out dimension-major in `(w, h, l, x, y, z, θ)` order.
    pub fn from_flat(spec: &IntervalSpec, flat: &[f64]) -> Result<Self> {
        let expected = spec.total_classes();
        if flat.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                actual: flat.len(),
            });
        }
        if let Some(v) = flat.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::OutOfRange {
                value: *v,
                min: 0.0,
                max: 1.0,
            });
        }
        let mut offset = 0;
        let per_dim = Dim::ALL.map(|d| {
            let n = spec.get(d).class_count();
            let v = flat[offset..offset + n].to_vec();
            offset += n;
            v
        });
        Ok(Self { per_dim })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.per_dim.iter().flatten().copied().collect()
    }

    pub fn get(&self, d: Dim) -> &[f64] {
        &self.per_dim[d.index()]
    }

    pub fn check_shape(&self, spec: &IntervalSpec) -> Result<()> {
        for d in Dim::ALL {
            let expected = spec.get(d).class_count();
            let actual = self.get(d).len();
            if expected != actual {
                return Err(Error::ShapeMismatch { expected, actual });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decoded {
    Refined { box3d: Box3D, confidence: f64 },
    Rejected,
}

/// Per-dimension argmax decoding. The box confidence is the geometric mean of the
/// seven winning confidences times the detection score. The guidance is rejected
/// when no dimension reaches `reject_threshold`.
pub fn decode_prediction(
    guidance: &Guidance,
    scores: &IntervalScores,
    spec: &IntervalSpec,
    reject_threshold: f64,
) -> Result<Decoded> {
    scores.check_shape(spec)?;
    let mut refined = guidance.box3d;
    let mut log_sum = 0.0;
    let mut any_confident = false;
    for d in Dim::ALL {
        let s = scores.get(d);
        // first index wins ties
        let (best, conf) = s
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        any_confident |= conf >= reject_threshold;
        log_sum += conf.max(0.0).ln();
        refined = shift_box(&refined, d, spec.get(d).center(best));
    }
    if !any_confident {
        return Ok(Decoded::Rejected);
    }
    let confidence = (log_sum / 7.0).exp() * guidance.source.score;
    Ok(Decoded::Refined {
        box3d: refined,
        confidence,
    })
}

/// Mean, sample standard deviation and range of one dimension's deltas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaSummary {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

pub fn summarize(values: &[f64]) -> Option<DeltaSummary> {
    if values.len() < 2 {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some(DeltaSummary {
        count: values.len(),
        mean,
        std: var.sqrt(),
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

/// Distribution of raw deltas over matched (guidance, ground truth) pairs.
pub fn delta_statistics(pairs: &[(Box3D, Box3D)]) -> Option<[DeltaSummary; 7]> {
    let deltas: Vec<[f64; 7]> = pairs.iter().map(|(g, t)| raw_deltas(g, t)).collect();
    let mut out = Vec::with_capacity(7);
    for d in Dim::ALL {
        let col: Vec<f64> = deltas.iter().map(|r| r[d.index()]).collect();
        out.push(summarize(&col)?);
    }
    out.try_into().ok()
}

/// Interval grid from delta statistics: σ is the standard deviation and
/// `N = ceil(max|Δ| / σ)` capped at `max_half`. A dimension without spread keeps
/// its interval from `fallback`.
pub fn interval_spec_from_stats(
    stats: &[DeltaSummary; 7],
    max_half: usize,
    fallback: &IntervalSpec,
) -> Result<IntervalSpec> {
    let dims = std::array::from_fn(|i| {
        let s = &stats[i];
        if !(s.std > 0.0 && s.std.is_finite()) {
            return *fallback.get(Dim::ALL[i]);
        }
        let reach = s.min.abs().max(s.max.abs());
        DimInterval {
            sigma: s.std,
            n_half: ((reach / s.std).ceil() as usize).clamp(1, max_half.max(1)),
        }
    });
    IntervalSpec::from_dims(dims)
}
