//! Seeded fixtures shared by the benchmarks.

use monoguide_core::geometry::{theta_to_alpha, Box3D};
use monoguide_core::metrics::{DetectionResult, FrameData};
use monoguide_core::synth::{generate_scene, perfect_detections, perturb_boxes, DetectionMode, Scene, SceneSpec};
use monoguide_core::{Detection2D, FeatureMap};

pub fn scene(count: usize, seed: u64) -> Scene {
    let spec = SceneSpec {
        seed,
        count,
        image_size: Some([1242.0, 375.0]),
        ..SceneSpec::default()
    };
    generate_scene(&spec).expect("benchmark scene")
}

pub fn detections(scene: &Scene) -> Vec<Detection2D> {
    perfect_detections(scene, DetectionMode::TightBbox, 0.07).expect("benchmark detections")
}

/// Ground-truth pairs and slightly perturbed copies for IoU kernels.
pub fn box_pairs(n: usize, seed: u64) -> Vec<(Box3D, Box3D)> {
    let s = scene(n, seed);
    let boxes = s.boxes();
    let noisy = perturb_boxes(&boxes, [0.1, 0.1, 0.3, 0.3, 0.05, 0.5, 0.1], seed + 1);
    boxes.into_iter().zip(noisy).collect()
}

/// Frames whose results are noisy copies of the ground truth with spread scores.
pub fn eval_frames(count: usize, seed: u64) -> Vec<FrameData> {
    let s = scene(count, seed);
    let noisy = perturb_boxes(&s.boxes(), [0.05, 0.05, 0.2, 0.3, 0.05, 0.8, 0.05], seed + 1);
    let mut k = 0;
    s.frames()
        .map(|gts| {
            let dets = gts
                .iter()
                .map(|gt| {
                    let b = noisy[k];
                    k += 1;
                    DetectionResult {
                        box3d: b,
                        box2d: gt.box2d,
                        alpha: theta_to_alpha(b.theta, b.x, b.z).unwrap_or(gt.alpha),
                        class_name: gt.class_name.clone(),
                        score: ((k * 7919) % 1000) as f64 / 1000.0,
                    }
                })
                .collect();
            FrameData {
                gts: gts.to_vec(),
                dets,
            }
        })
        .collect()
}

/// KITTI-sized feature map with a cheap deterministic pattern.
pub fn feature_map(channels: usize, stride: f64) -> FeatureMap {
    let (h, w) = ((375.0 / stride) as usize, (1242.0 / stride) as usize);
    FeatureMap::from_fn(channels, h, w, |c, r, col| ((r * 13 + col * 7 + c * 3) % 29) as f64)
        .with_stride(stride)
        .expect("positive stride")
}
