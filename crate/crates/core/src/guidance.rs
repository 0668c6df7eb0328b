//! Coarse cuboid ("guidance") from a 2D detection, its observation angle, the class
//! size prior and the camera.
//!
//! The top midpoint of the 2D box is taken as the projected top center of the
//! object. The projected bottom center sits a fraction `lambda` of the box height
//! above the bottom edge. Back-projecting both through `K⁻¹` gives a normalized
//! height whose ratio to the prior height is the depth.

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{alpha_to_theta, Box2D, Box3D, CameraModel};

/// Normalized heights at or below this are rejected as degenerate.
pub const DEFAULT_DEGENERATE_EPS: f64 = 1e-6;

/// Mean object size of a class plus the bottom-center shift fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizePrior {
    pub class_name: String,
    pub w: f64,
    pub h: f64,
    pub l: f64,
    pub lambda: f64,
}

impl SizePrior {
    pub fn new(class_name: impl Into<String>, w: f64, h: f64, l: f64, lambda: f64) -> Result<Self> {
        let p = Self {
            class_name: class_name.into(),
            w,
            h,
            l,
            lambda,
        };
        p.validate()?;
        Ok(p)
    }

    /// Car statistics used when no config overrides them.
    pub fn default_car() -> Self {
        Self {
            class_name: "Car".into(),
            w: 1.62,
            h: 1.53,
            l: 3.89,
            lambda: 0.07,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w > 0.0 && self.h > 0.0 && self.l > 0.0) {
            return Err(Error::Config(format!(
                "prior `{}` needs positive sizes",
                self.class_name
            )));
        }
        if !(0.0..0.5).contains(&self.lambda) {
            return Err(Error::Config(format!(
                "prior `{}` lambda {} outside [0, 0.5)",
                self.class_name, self.lambda
            )));
        }
        Ok(())
    }
}

/// Lookup table of size priors by class name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PriorTable {
    priors: Vec<SizePrior>,
}

impl Default for PriorTable {
    fn default() -> Self {
        Self {
            priors: vec![SizePrior::default_car()],
        }
    }
}

impl PriorTable {
    pub fn new(priors: Vec<SizePrior>) -> Result<Self> {
        for p in &priors {
            p.validate()?;
        }
        Ok(Self { priors })
    }

    pub fn get(&self, class_name: &str) -> Option<&SizePrior> {
        self.priors.iter().find(|p| p.class_name == class_name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &SizePrior> {
        self.priors.iter()
    }
}

/// Output of the 2D detector: box, observation angle, class and score.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection2D {
    pub box2d: Box2D,
    pub alpha: f64,
    pub class_name: String,
    pub score: f64,
}

impl Detection2D {
    pub fn new(box2d: Box2D, alpha: f64, class_name: impl Into<String>, score: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::OutOfRange {
                value: score,
                min: 0.0,
                max: 1.0,
            });
        }
        Ok(Self {
            box2d,
            alpha,
            class_name: class_name.into(),
            score,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Guidance {
    pub box3d: Box3D,
    pub source: Detection2D,
    /// `(x̃_b, ỹ_b)` of the back-projected bottom center.
    pub normalized_bottom: (f64, f64),
    pub depth: f64,
}

/// Homogeneous pixel positions of the projected top center and bottom center.
pub fn midpoints(b: &Box2D, lambda: f64) -> (Vector3<f64>, Vector3<f64>) {
    let top = Vector3::new(b.cx, b.cy - b.h / 2.0, 1.0);
    let bottom = Vector3::new(b.cx, b.cy + (0.5 - lambda) * b.h, 1.0);
    (top, bottom)
}

/// `K⁻¹ · pixel`, rescaled so the third component is 1.
pub fn backproject_normalized(camera: &CameraModel, pixel: &Vector3<f64>) -> Result<Vector3<f64>> {
    let ray = camera.intrinsics_inv() * pixel;
    if ray.z.abs() < 1e-12 || !ray.iter().all(|v| v.is_finite()) {
        return Err(Error::SingularIntrinsics(format!(
            "back-projection of {pixel:?} has no finite normalized form"
        )));
    }
    Ok(ray / ray.z)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocationEstimate {
    /// Bottom-face center in camera coordinates.
    pub location: Point3<f64>,
    pub depth: f64,
    pub normalized_bottom: Vector3<f64>,
    pub normalized_top: Vector3<f64>,
}

pub fn estimate_location(camera: &CameraModel, b: &Box2D, prior: &SizePrior) -> Result<LocationEstimate> {
    estimate_location_with_eps(camera, b, prior, DEFAULT_DEGENERATE_EPS)
}

pub fn estimate_location_with_eps(
    camera: &CameraModel,
    b: &Box2D,
    prior: &SizePrior,
    eps: f64,
) -> Result<LocationEstimate> {
    let (top_px, bottom_px) = midpoints(b, prior.lambda);
    let top = backproject_normalized(camera, &top_px)?;
    let bottom = backproject_normalized(camera, &bottom_px)?;
    let normalized_height = bottom.y - top.y;
    if normalized_height <= eps {
        return Err(Error::DegenerateHeight(normalized_height));
    }
    let depth = prior.h / normalized_height;
    // P = K [I | t]: the back-projected ray lives in the translated frame.
    let location = Point3::from(bottom * depth - camera.translation());
    Ok(LocationEstimate {
        location,
        depth,
        normalized_bottom: bottom,
        normalized_top: top,
    })
}

pub fn generate_guidance(camera: &CameraModel, det: &Detection2D, priors: &PriorTable) -> Result<Guidance> {
    generate_guidance_with_eps(camera, det, priors, DEFAULT_DEGENERATE_EPS)
}

pub fn generate_guidance_with_eps(
    camera: &CameraModel,
    det: &Detection2D,
    priors: &PriorTable,
    eps: f64,
) -> Result<Guidance> {
    let prior = priors
        .get(&det.class_name)
        .ok_or_else(|| Error::UnknownClass(det.class_name.clone()))?;
    let est = estimate_location_with_eps(camera, &det.box2d, prior, eps)?;
    let loc = est.location;
    let theta = alpha_to_theta(det.alpha, loc.x, loc.z)?;
    let box3d = Box3D::new(prior.w, prior.h, prior.l, loc.x, loc.y, loc.z, theta)?;
    Ok(Guidance {
        box3d,
        source: det.clone(),
        normalized_bottom: (est.normalized_bottom.x, est.normalized_bottom.y),
        depth: est.depth,
    })
}

/// Per-object bottom-center shift fractions `(bottom_edge − v_bottom_center) / h2d`
/// measured against tight 2D boxes. Objects whose corners do not all project are skipped.
pub fn lambda_samples(camera: &CameraModel, boxes: &[Box3D]) -> Vec<f64> {
    boxes
        .iter()
        .filter_map(|b| {
            let bb = camera.project_box(b).ok()?;
            let bc = camera.project(&b.location()).ok()?;
            Some((bb.bottom() - bc.y) / bb.h)
        })
        .collect()
}

/// Median of [`lambda_samples`], the statistic the toolkit uses for `lambda`.
pub fn lambda_statistic(camera: &CameraModel, boxes: &[Box3D]) -> Option<f64> {
    let mut s = lambda_samples(camera, boxes);
    if s.is_empty() {
        return None;
    }
    s.sort_by(f64::total_cmp);
    let n = s.len();
    Some(if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    })
}
