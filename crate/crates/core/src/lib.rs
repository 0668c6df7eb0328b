//! Non-neural core of a guidance-based monocular 3D detector: guidance cuboids
//! from 2D detections, perspective warping of visible faces, interval-classification
//! refinement with quality-aware labels, and KITTI-style evaluation.

pub mod config;
pub mod error;
pub mod geometry;
pub mod guidance;
pub mod kitti;
pub mod metrics;
pub mod refine;
pub mod synth;
pub mod warp;

pub use config::ToolkitConfig;
pub use error::{Error, Result};
pub use geometry::{
    alpha_to_theta, theta_to_alpha, visible_surfaces, wrap_angle, Box2D, Box3D, CameraModel, Surface, SurfaceQuad,
    SurfaceSet,
};
pub use guidance::{generate_guidance, Detection2D, Guidance, PriorTable, SizePrior};
pub use metrics::{iou3d, DetectionResult, Difficulty, FrameData, GroundTruth};
pub use refine::{decode_prediction, Decoded, Dim, IntervalScores, IntervalSpec};
pub use warp::{FeatureMap, GridSize, Homography, Quad2D};
