use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "monoguide", version, about = "Guidance-based monocular 3D detection toolkit")]
pub struct Cli {
    /// Worker threads for frame-level parallelism (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,

    /// Treat warnings (skipped detections, missing score rows, ...) as data errors.
    #[arg(long, global = true)]
    pub strict: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Lift 2D detections to guidance cuboids.
    Guide(GuideArgs),
    /// Decode interval confidences into refined boxes.
    Refine(RefineArgs),
    /// Evaluate KITTI-format results against ground truth.
    Eval(EvalArgs),
    /// Residual statistics between guidances and ground truth, emitted as config.
    Stats(StatsArgs),
    /// Write a synthetic scene as KITTI labels and calibration files.
    Synth(SynthArgs),
    /// Warp the visible faces of one box out of a PGM/PPM feature image.
    WarpDemo(WarpDemoArgs),
}

#[derive(Debug, Args)]
pub struct GuideArgs {
    /// Directory of per-frame calibration files.
    #[arg(long)]
    pub calib: PathBuf,
    /// Directory of per-frame 2D detection files (label lines with a score).
    #[arg(long)]
    pub detections: PathBuf,
    /// Toolkit config holding the size priors.
    #[arg(long)]
    pub priors: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RefineArgs {
    /// Directory of guidance result files written by `guide`.
    #[arg(long)]
    pub guidances: PathBuf,
    /// Directory of per-frame interval confidence files.
    #[arg(long)]
    pub scores: PathBuf,
    /// Toolkit config holding the interval spec.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Overrides the config's rejection threshold.
    #[arg(long, value_name = "F")]
    pub reject_threshold: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    Ap3d,
    Alp,
    Aos,
    Recall,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DifficultyArg {
    Easy,
    Moderate,
    Hard,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub results: PathBuf,
    #[arg(long, value_enum)]
    pub metric: Metric,
    /// IoU threshold; repeat for several rows.
    #[arg(long, value_name = "F", conflicts_with = "dist")]
    pub iou: Vec<f64>,
    /// Bottom-center distance threshold in meters; repeat for several rows.
    #[arg(long, value_name = "F")]
    pub dist: Vec<f64>,
    /// Difficulty columns to report (default: all three).
    #[arg(long, value_enum)]
    pub difficulty: Vec<DifficultyArg>,
    #[arg(long, default_value = "Car")]
    pub class: String,
    /// Recall levels used for interpolation.
    #[arg(long, default_value_t = 11, value_parser = parse_points)]
    pub points: usize,
    /// Toolkit config holding the difficulty thresholds.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Also write the table as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Write every precision/recall curve as CSV.
    #[arg(long)]
    pub pr_csv: Option<PathBuf>,
}

fn parse_points(s: &str) -> Result<usize, String> {
    match s {
        "11" => Ok(11),
        "40" => Ok(40),
        _ => Err(format!("`{s}` is not 11 or 40")),
    }
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub guidances: PathBuf,
    /// Calibration directory; when given, the bottom-center shift is measured too.
    #[arg(long)]
    pub calib: Option<PathBuf>,
    /// Base config whose other sections are carried over.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Upper bound on the half class count per dimension.
    #[arg(long, default_value_t = 10)]
    pub max_half: usize,
    /// Write the config here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-dimension summary as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DetectionModeArg {
    ExactLambda,
    TightBbox,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Scene spec (TOML).
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write perfect 2D detections in this mode.
    #[arg(long, value_enum)]
    pub detections: Option<DetectionModeArg>,
}

#[derive(Debug, Args)]
pub struct WarpDemoArgs {
    /// Calibration file.
    #[arg(long)]
    pub calib: PathBuf,
    #[arg(long, default_value = "P2")]
    pub calib_key: String,
    /// Box parameters `w,h,l,x,y,z,theta`.
    #[arg(long = "box", value_name = "PARAMS", allow_hyphen_values = true)]
    pub box_params: String,
    /// Feature image (PGM or PPM).
    #[arg(long)]
    pub feature: PathBuf,
    /// Image pixels per feature cell.
    #[arg(long, default_value_t = 1.0)]
    pub stride: f64,
    /// Output grid as `ROWSxCOLS`.
    #[arg(long, default_value = "5x5")]
    pub grid: String,
    /// Output CSV.
    #[arg(long)]
    pub out: PathBuf,
}
