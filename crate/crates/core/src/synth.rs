//! Synthetic ground-truth fleets and idealized detector and classifier outputs.
//!
//! Randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! `seed_from_u64`, so a scene is fully determined by its [`SceneSpec`].

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{theta_to_alpha, wrap_angle, Box2D, Box3D, CameraModel};
use crate::guidance::{Detection2D, SizePrior};
use crate::metrics::GroundTruth;
use crate::refine::{classify_delta, raw_deltas, Dim, IntervalScores, IntervalSpec};

/// Projection matrix of the KITTI object benchmark sample used as the default rig.
pub const KITTI_P2: [f64; 12] = [
    7.215377e+02,
    0.0,
    6.095593e+02,
    4.485728e+01,
    0.0,
    7.215377e+02,
    1.728540e+02,
    2.163791e-01,
    0.0,
    0.0,
    1.0,
    2.745884e-03,
];

const MAX_ATTEMPTS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum YawDistribution {
    Uniform { min: f64, max: f64 },
    /// Heading along the road (`±π/2`, equally likely) plus Gaussian jitter.
    RoadAligned { std: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SizeDistribution {
    FixedAtPrior,
    Gaussian { std_w: f64, std_h: f64, std_l: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSpec {
    pub seed: u64,
    pub count: usize,
    pub objects_per_frame: usize,
    /// `[min, max]` of z (meters).
    pub depth_range: [f64; 2],
    /// `[min, max]` of x (meters).
    pub lateral_range: [f64; 2],
    pub yaw: YawDistribution,
    pub size: SizeDistribution,
    pub prior: SizePrior,
    pub camera_height: f64,
    /// Row-major 3x4 projection matrix.
    pub camera: [f64; 12],
    /// When set, every object's projected box must lie inside `[0, w] × [0, h]`.
    pub image_size: Option<[f64; 2]>,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            count: 100,
            objects_per_frame: 8,
            depth_range: [5.0, 60.0],
            lateral_range: [-15.0, 15.0],
            yaw: YawDistribution::Uniform { min: -PI, max: PI },
            size: SizeDistribution::FixedAtPrior,
            prior: SizePrior::default_car(),
            camera_height: 1.65,
            camera: KITTI_P2,
            image_size: None,
        }
    }
}

impl SceneSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let range_ok = |r: [f64; 2]| r[0].is_finite() && r[1].is_finite() && r[0] <= r[1];
        if !range_ok(self.depth_range) || self.depth_range[0] <= 0.0 {
            return Err(Error::Config(format!("invalid depth range {:?}", self.depth_range)));
        }
        if !range_ok(self.lateral_range) {
            return Err(Error::Config(format!("invalid lateral range {:?}", self.lateral_range)));
        }
        if let YawDistribution::Uniform { min, max } = self.yaw {
            if !range_ok([min, max]) {
                return Err(Error::Config(format!("invalid yaw range [{min}, {max}]")));
            }
        }
        if self.objects_per_frame == 0 {
            return Err(Error::Config("objects_per_frame must be at least 1".into()));
        }
        self.prior.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub camera: CameraModel,
    pub objects: Vec<GroundTruth>,
    pub objects_per_frame: usize,
}

impl Scene {
    /// Objects grouped into frames of `objects_per_frame`.
    pub fn frames(&self) -> impl Iterator<Item = &[GroundTruth]> {
        self.objects.chunks(self.objects_per_frame)
    }

    pub fn boxes(&self) -> Vec<Box3D> {
        self.objects.iter().map(|g| g.box3d).collect()
    }
}

fn normal(rng: &mut ChaCha8Rng, std: f64) -> f64 {
    if std <= 0.0 {
        return 0.0;
    }
    Normal::new(0.0, std).map(|n| n.sample(rng)).unwrap_or(0.0)
}

fn uniform(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    if r[1] > r[0] {
        rng.random_range(r[0]..r[1])
    } else {
        r[0]
    }
}

fn sample_object(spec: &SceneSpec, camera: &CameraModel, rng: &mut ChaCha8Rng) -> Option<GroundTruth> {
    let z = uniform(rng, spec.depth_range);
    let x = uniform(rng, spec.lateral_range);
    let theta = match spec.yaw {
        YawDistribution::Uniform { min, max } => uniform(rng, [min, max]),
        YawDistribution::RoadAligned { std } => {
            let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            side * FRAC_PI_2 + normal(rng, std)
        }
    };
    let p = &spec.prior;
    let (w, h, l) = match spec.size {
        SizeDistribution::FixedAtPrior => (p.w, p.h, p.l),
        SizeDistribution::Gaussian { std_w, std_h, std_l } => (
            p.w + normal(rng, std_w),
            p.h + normal(rng, std_h),
            p.l + normal(rng, std_l),
        ),
    };
    let b = Box3D::new(w, h, l, x, spec.camera_height, z, theta).ok()?;
    let box2d = camera.project_box(&b).ok()?;
    if let Some([iw, ih]) = spec.image_size {
        if box2d.left() < 0.0 || box2d.top() < 0.0 || box2d.right() > iw || box2d.bottom() > ih {
            return None;
        }
    }
    Some(GroundTruth {
        box3d: b,
        box2d,
        alpha: theta_to_alpha(b.theta, b.x, b.z).ok()?,
        class_name: p.class_name.clone(),
        truncation: 0.0,
        occlusion: 0,
    })
}

/// Draws `spec.count` objects on the ground plane `y = camera_height`.
pub fn generate_scene(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let camera = CameraModel::from_projection(spec.camera)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut objects = Vec::with_capacity(spec.count);
    for _ in 0..spec.count {
        let gt = (0..MAX_ATTEMPTS)
            .find_map(|_| sample_object(spec, &camera, &mut rng))
            .ok_or_else(|| Error::Config("scene spec admits no visible objects".into()))?;
        objects.push(gt);
    }
    Ok(Scene {
        camera,
        objects,
        objects_per_frame: spec.objects_per_frame,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionMode {
    /// Top edge through the projected top center, bottom center placed by `lambda`.
    ExactLambda,
    /// Tight box around the projected corners.
    TightBbox,
}

/// 2D box for which guidance generation with `lambda` recovers the bottom center exactly.
pub fn exact_lambda_box(camera: &CameraModel, b: &Box3D, lambda: f64) -> Result<Box2D> {
    let top = camera.project(&b.top_center())?;
    let bottom = camera.project(&b.location())?;
    let h2d = (bottom.y - top.y) / (1.0 - lambda);
    let width = camera.project_box(b)?.w;
    Box2D::new(bottom.x, top.y + h2d / 2.0, width, h2d)
}

/// Detections with score 1 and the true observation angle.
pub fn perfect_detections(scene: &Scene, mode: DetectionMode, lambda: f64) -> Result<Vec<Detection2D>> {
    scene
        .objects
        .iter()
        .map(|gt| {
            let box2d = match mode {
                DetectionMode::ExactLambda => exact_lambda_box(&scene.camera, &gt.box3d, lambda)?,
                DetectionMode::TightBbox => scene.camera.project_box(&gt.box3d)?,
            };
            let alpha = theta_to_alpha(gt.box3d.theta, gt.box3d.x, gt.box3d.z)?;
            Detection2D::new(box2d, alpha, gt.class_name.clone(), 1.0)
        })
        .collect()
}

/// One-hot confidences at the interval of the true raw residual.
pub fn oracle_scores(guidance: &Box3D, gt: &Box3D, spec: &IntervalSpec) -> IntervalScores {
    let deltas = raw_deltas(guidance, gt);
    IntervalScores {
        per_dim: Dim::ALL.map(|d| {
            let mut v = vec![0.0; spec.get(d).class_count()];
            v[classify_delta(spec, deltas[d.index()], d)] = 1.0;
            v
        }),
    }
}

/// Copies of `gts` offset so that `gt − guidance` per dimension is Gaussian with
/// the given standard deviations (`w, h, l, x, y, z, θ` order). Sizes stay positive.
pub fn perturb_boxes(gts: &[Box3D], stds: [f64; 7], seed: u64) -> Vec<Box3D> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gts.iter()
        .map(|g| {
            let p = g.to_array();
            let q: [f64; 7] = std::array::from_fn(|i| p[i] - normal(&mut rng, stds[i]));
            Box3D {
                w: q[0].max(1e-3),
                h: q[1].max(1e-3),
                l: q[2].max(1e-3),
                x: q[3],
                y: q[4],
                z: q[5],
                theta: wrap_angle(q[6]),
            }
        })
        .collect()
}
