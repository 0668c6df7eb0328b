pub mod eval;
pub mod guide;
pub mod refine;
pub mod stats;
pub mod synth;
pub mod warp_demo;
