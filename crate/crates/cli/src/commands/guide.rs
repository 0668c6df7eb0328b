use rayon::prelude::*;

use monoguide_core::guidance::generate_guidance_with_eps;
use monoguide_core::kitti::{parse_calib, read_detections, write_results, LabelRecord};

use crate::args::GuideArgs;
use crate::io::{create_dir, ensure_finite, in_file, list_frames, load_config, read_text, write_atomic, CmdResult, Failure, Reporter};

pub fn run(args: &GuideArgs, reporter: &Reporter) -> CmdResult<()> {
    let config = load_config(args.priors.as_deref())?;
    let frames = list_frames(&args.detections)?;
    create_dir(&args.out)?;

    let written: Vec<usize> = frames
        .par_iter()
        .map(|f| {
            let calib_path = args.calib.join(format!("{}.txt", f.frame));
            if !calib_path.exists() {
                return Err(Failure::data(format!(
                    "frame {}: no calibration file {}",
                    f.frame,
                    calib_path.display()
                )));
            }
            let calib = in_file(parse_calib(&read_text(&calib_path)?), &calib_path)?;
            let camera = in_file(calib.camera(&config.calib_key), &calib_path)?;
            let dets = in_file(read_detections(&read_text(&f.path)?), &f.path)?;

            let mut records = Vec::with_capacity(dets.len());
            let mut sidecar = String::from("index,detection,x_b,y_b,depth\n");
            for (i, det) in dets.iter().enumerate() {
                match generate_guidance_with_eps(&camera, det, &config.priors, config.degenerate_eps) {
                    Ok(g) => {
                        let (xb, yb) = g.normalized_bottom;
                        ensure_finite(&[xb, yb, g.depth], "guidance")?;
                        sidecar.push_str(&format!("{},{},{xb:.6},{yb:.6},{:.6}\n", records.len(), i, g.depth));
                        records.push(LabelRecord::from_box3d(
                            &det.class_name,
                            &g.box3d,
                            &det.box2d,
                            det.alpha,
                            Some(det.score),
                        ));
                    }
                    Err(e) => reporter.warn(format!("{}: detection {}: skipped: {e}", f.path.display(), i + 1))?,
                }
            }
            write_atomic(&args.out.join(format!("{}.txt", f.frame)), &write_results(&records))?;
            write_atomic(&args.out.join(format!("{}.csv", f.frame)), &sidecar)?;
            Ok(records.len())
        })
        .collect::<CmdResult<_>>()?;

    eprintln!(
        "wrote {} guidances for {} frames to {}",
        written.iter().sum::<usize>(),
        frames.len(),
        args.out.display()
    );
    Ok(())
}
