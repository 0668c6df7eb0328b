use std::fmt::Write as _;

use monoguide_core::geometry::{theta_to_alpha, visible_surfaces, Box3D};
use monoguide_core::kitti::parse_calib;
use monoguide_core::warp::{extract_surface_features, FeatureMap, GridSize};

use crate::args::WarpDemoArgs;
use crate::io::{ensure_finite, in_file, read_text, write_atomic, CmdResult, DataContext, Failure};

fn parse_box(text: &str) -> CmdResult<Box3D> {
    let values = text
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::usage(format!("--box `{text}`: {e}")))?;
    let p: [f64; 7] = values
        .try_into()
        .map_err(|v: Vec<f64>| Failure::usage(format!("--box needs 7 values w,h,l,x,y,z,theta, got {}", v.len())))?;
    Box3D::from_array(p).map_err(|e| Failure::usage(format!("--box: {e}")))
}

fn parse_grid(text: &str) -> CmdResult<GridSize> {
    let bad = || Failure::usage(format!("--grid `{text}` is not ROWSxCOLS"));
    let (r, c) = text.split_once(['x', 'X']).ok_or_else(bad)?;
    let rows: usize = r.trim().parse().map_err(|_| bad())?;
    let cols: usize = c.trim().parse().map_err(|_| bad())?;
    if rows < 2 || cols < 2 {
        return Err(Failure::usage("--grid needs at least 2x2 cells"));
    }
    Ok(GridSize { rows, cols })
}

/// Loads a PGM (one channel) or PPM (three channels) with values scaled to `[0, 1]`.
fn load_feature(path: &std::path::Path, stride: f64) -> CmdResult<FeatureMap> {
    let img = image::open(path).data_ctx(format!("{}", path.display()))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let fm = if img.color().channel_count() <= 2 {
        let g = img.to_luma32f();
        FeatureMap::from_fn(1, h, w, |_, r, c| g.get_pixel(c as u32, r as u32).0[0] as f64)
    } else {
        let rgb = img.to_rgb32f();
        FeatureMap::from_fn(3, h, w, |ch, r, c| rgb.get_pixel(c as u32, r as u32).0[ch] as f64)
    };
    fm.with_stride(stride).map_err(|e| Failure::usage(format!("--stride: {e}")))
}

pub fn run(args: &WarpDemoArgs) -> CmdResult<()> {
    let b = parse_box(&args.box_params)?;
    let grid = parse_grid(&args.grid)?;
    let calib = in_file(parse_calib(&read_text(&args.calib)?), &args.calib)?;
    let camera = in_file(calib.camera(&args.calib_key), &args.calib)?;
    let fm = load_feature(&args.feature, args.stride)?;

    let alpha = theta_to_alpha(b.theta, b.x, b.z).map_err(|e| Failure::data(format!("--box: {e}")))?;
    let surfaces = visible_surfaces(&b, alpha);
    let grids = extract_surface_features(&fm, &camera, &surfaces, grid)
        .map_err(|e| Failure::data(format!("cannot warp the visible faces: {e}")))?;

    let mut csv = String::from("surface,channel,row,col,value\n");
    for g in &grids {
        ensure_finite(g.grid.data(), "warped grid")?;
        for ch in 0..g.grid.channels() {
            for r in 0..g.grid.height() {
                for c in 0..g.grid.width() {
                    let _ = writeln!(csv, "{},{ch},{r},{c},{:.6}", g.surface.name(), g.grid.get(ch, r, c));
                }
            }
        }
    }
    write_atomic(&args.out, &csv)?;
    let names: Vec<&str> = grids.iter().map(|g| g.surface.name()).collect();
    eprintln!("alpha {alpha:.4}: warped {} to {}", names.join(", "), args.out.display());
    Ok(())
}
