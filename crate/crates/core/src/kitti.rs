//! Strict readers and writers for KITTI calibration and label files, and the
//! toolkit's own interval-score files.
//!
//! Fields are separated by any run of spaces or tabs. Numbers use `.` as the
//! decimal point regardless of locale. Every rejected line is reported with its
//! 1-based line number and field index.

use crate::error::{Error, Result};
use crate::geometry::{Box2D, Box3D, CameraModel};
use crate::guidance::Detection2D;
use crate::metrics::{DetectionResult, GroundTruth};
use crate::refine::{IntervalScores, IntervalSpec};

/// Matrix keys accepted in calibration files, with their field counts.
const CALIB_KEYS: &[(&str, usize)] = &[
    ("P0", 12),
    ("P1", 12),
    ("P2", 12),
    ("P3", 12),
    ("R0_rect", 9),
    ("R_rect", 9),
    ("Tr_velo_to_cam", 12),
    ("Tr_velo_cam", 12),
    ("Tr_imu_to_velo", 12),
    ("Tr_imu_velo", 12),
];

fn parse_error(line: usize, field: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        field,
        message: message.into(),
    }
}

fn parse_f64(tok: &str, line: usize, field: usize) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| parse_error(line, field, format!("`{tok}` is not a number")))?;
    if !v.is_finite() {
        return Err(parse_error(line, field, format!("`{tok}` is not finite")));
    }
    Ok(v)
}

fn fields(line: &str) -> Vec<&str> {
    line.split([' ', '\t']).filter(|s| !s.is_empty()).collect()
}

/// Calibration matrices in file order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CalibFile {
    pub entries: Vec<(String, Vec<f64>)>,
}

impl CalibFile {
    pub fn get(&self, key: &str) -> Option<&[f64]> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_slice())
    }

    /// Camera from a 3x4 projection entry such as `P2`.
    pub fn camera(&self, key: &str) -> Result<CameraModel> {
        let v = self
            .get(key)
            .ok_or_else(|| Error::Config(format!("calibration has no `{key}` matrix")))?;
        let rows: [f64; 12] = v
            .try_into()
            .map_err(|_| Error::ShapeMismatch {
                expected: 12,
                actual: v.len(),
            })?;
        CameraModel::from_projection(rows)
    }

    pub fn from_camera(key: &str, camera: &CameraModel) -> Self {
        Self {
            entries: vec![(key.to_string(), camera.projection_rows().to_vec())],
        }
    }
}

pub fn parse_calib(text: &str) -> Result<CalibFile> {
    let mut entries = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        let (key, rest) = raw
            .split_once(':')
            .ok_or_else(|| parse_error(line_no, 1, "missing `key:` prefix"))?;
        let key = key.trim();
        let arity = CALIB_KEYS
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, n)| *n)
            .ok_or_else(|| Error::UnknownMatrixKey {
                key: key.to_string(),
                line: line_no,
            })?;
        let toks = fields(rest);
        if toks.len() != arity {
            let field = toks.len().min(arity) + 2;
            return Err(parse_error(
                line_no,
                field,
                format!("`{key}` needs {arity} values, found {}", toks.len()),
            ));
        }
        let values = toks
            .iter()
            .enumerate()
            .map(|(i, t)| parse_f64(t, line_no, i + 2))
            .collect::<Result<Vec<_>>>()?;
        entries.push((key.to_string(), values));
    }
    Ok(CalibFile { entries })
}

pub fn write_calib(calib: &CalibFile) -> String {
    let mut out = String::new();
    for (k, v) in &calib.entries {
        out.push_str(k);
        out.push(':');
        for x in v {
            out.push_str(&format!(" {x:.12e}"));
        }
        out.push('\n');
    }
    out
}

/// One object line. `truncated` and `occluded` are `-1` in result files.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelRecord {
    pub kind: String,
    pub truncated: f64,
    pub occluded: i32,
    pub alpha: f64,
    pub bbox: [f64; 4],
    /// KITTI order: height, width, length.
    pub dimensions: [f64; 3],
    pub location: [f64; 3],
    pub rotation_y: f64,
    pub score: Option<f64>,
}

impl LabelRecord {
    /// KITTI `(h, w, l)` dimensions onto `(w, h, l)` box parameters.
    pub fn to_box3d(&self) -> Result<Box3D> {
        let [h, w, l] = self.dimensions;
        let [x, y, z] = self.location;
        Box3D::new(w, h, l, x, y, z, self.rotation_y)
    }

    pub fn to_box2d(&self) -> Result<Box2D> {
        let [l, t, r, b] = self.bbox;
        Box2D::from_ltrb(l, t, r, b)
    }

    pub fn from_box3d(kind: &str, b: &Box3D, box2d: &Box2D, alpha: f64, score: Option<f64>) -> Self {
        Self {
            kind: kind.to_string(),
            truncated: -1.0,
            occluded: -1,
            alpha,
            bbox: [box2d.left(), box2d.top(), box2d.right(), box2d.bottom()],
            dimensions: [b.h, b.w, b.l],
            location: [b.x, b.y, b.z],
            rotation_y: b.theta,
            score,
        }
    }

    pub fn is_dont_care(&self) -> bool {
        self.kind == "DontCare"
    }

    pub fn to_ground_truth(&self) -> Result<GroundTruth> {
        Ok(GroundTruth {
            box3d: self.to_box3d()?,
            box2d: self.to_box2d()?,
            alpha: self.alpha,
            class_name: self.kind.clone(),
            truncation: self.truncated.max(0.0),
            occlusion: self.occluded.max(0),
        })
    }

    pub fn to_detection_result(&self) -> Result<DetectionResult> {
        Ok(DetectionResult {
            box3d: self.to_box3d()?,
            box2d: self.to_box2d()?,
            alpha: self.alpha,
            class_name: self.kind.clone(),
            score: self.score.unwrap_or(1.0),
        })
    }
}

fn parse_label_line(line: &str, line_no: usize) -> Result<LabelRecord> {
    let toks = fields(line);
    if toks.len() < 15 {
        return Err(parse_error(
            line_no,
            toks.len() + 1,
            format!("label needs 15 or 16 fields, found {}", toks.len()),
        ));
    }
    if toks.len() > 16 {
        return Err(parse_error(line_no, 17, format!("label has {} fields, at most 16 allowed", toks.len())));
    }
    let num = |i: usize| parse_f64(toks[i], line_no, i + 1);
    let truncated = num(1)?;
    if truncated != -1.0 && !(0.0..=1.0).contains(&truncated) {
        return Err(parse_error(line_no, 2, format!("truncation {truncated} outside [0, 1]")));
    }
    let occluded: i32 = toks[2]
        .parse()
        .map_err(|_| parse_error(line_no, 3, format!("`{}` is not an integer", toks[2])))?;
    if !(-1..=3).contains(&occluded) {
        return Err(parse_error(line_no, 3, format!("occlusion {occluded} outside 0..=3")));
    }
    let alpha = num(3)?;
    let bbox = [num(4)?, num(5)?, num(6)?, num(7)?];
    if bbox[2] <= bbox[0] {
        return Err(parse_error(line_no, 7, "bbox right must exceed left"));
    }
    if bbox[3] <= bbox[1] {
        return Err(parse_error(line_no, 8, "bbox bottom must exceed top"));
    }
    let dimensions = [num(8)?, num(9)?, num(10)?];
    let location = [num(11)?, num(12)?, num(13)?];
    let rotation_y = num(14)?;
    let score = if toks.len() == 16 { Some(num(15)?) } else { None };
    Ok(LabelRecord {
        kind: toks[0].to_string(),
        truncated,
        occluded,
        alpha,
        bbox,
        dimensions,
        location,
        rotation_y,
        score,
    })
}

pub fn parse_labels(text: &str) -> Result<Vec<LabelRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_label_line(l, i + 1))
        .collect()
}

fn format_label(r: &LabelRecord) -> String {
    let mut s = format!(
        "{} {:.6} {} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6}",
        r.kind,
        r.truncated,
        r.occluded,
        r.alpha,
        r.bbox[0],
        r.bbox[1],
        r.bbox[2],
        r.bbox[3],
        r.dimensions[0],
        r.dimensions[1],
        r.dimensions[2],
        r.location[0],
        r.location[1],
        r.location[2],
        r.rotation_y
    );
    if let Some(score) = r.score {
        s.push_str(&format!(" {score:.6}"));
    }
    s
}

/// Label or result lines, all reals with 6 decimals.
pub fn write_results(records: &[LabelRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&format_label(r));
        out.push('\n');
    }
    out
}

/// 2D detections: label lines that must carry a score.
pub fn read_detections(text: &str) -> Result<Vec<Detection2D>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let r = parse_label_line(raw, line_no)?;
        let score = r
            .score
            .ok_or_else(|| parse_error(line_no, 16, "detection lines need a score field"))?;
        let box2d = r.to_box2d().map_err(|e| parse_error(line_no, 5, e.to_string()))?;
        let det = Detection2D::new(box2d, r.alpha, r.kind, score).map_err(|e| parse_error(line_no, 16, e.to_string()))?;
        out.push(det);
    }
    Ok(out)
}

/// Score file: one line per guidance, an integer id followed by the flattened
/// confidences in `(w, h, l, x, y, z, θ)` dimension order.
pub fn read_interval_scores(text: &str, spec: &IntervalSpec) -> Result<Vec<(usize, IntervalScores)>> {
    let expected = spec.total_classes();
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let toks = fields(raw);
        if toks.is_empty() {
            continue;
        }
        let id: usize = toks[0]
            .parse()
            .map_err(|_| parse_error(line_no, 1, format!("`{}` is not a guidance id", toks[0])))?;
        if toks.len() - 1 != expected {
            return Err(Error::ShapeMismatch {
                expected,
                actual: toks.len() - 1,
            });
        }
        let values = toks[1..]
            .iter()
            .enumerate()
            .map(|(i, t)| parse_f64(t, line_no, i + 2))
            .collect::<Result<Vec<_>>>()?;
        let scores = IntervalScores::from_flat(spec, &values).map_err(|e| match e {
            Error::OutOfRange { .. } => {
                let field = values.iter().position(|v| !(0.0..=1.0).contains(v)).unwrap_or(0) + 2;
                parse_error(line_no, field, e.to_string())
            }
            other => other,
        })?;
        out.push((id, scores));
    }
    Ok(out)
}

pub fn write_interval_scores(rows: &[(usize, IntervalScores)]) -> String {
    let mut out = String::new();
    for (id, s) in rows {
        out.push_str(&id.to_string());
        for v in s.to_flat() {
            out.push_str(&format!(" {v:.6}"));
        }
        out.push('\n');
    }
    out
}
