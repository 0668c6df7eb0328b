use std::collections::HashMap;

use rayon::prelude::*;

use monoguide_core::geometry::theta_to_alpha;
use monoguide_core::guidance::{Detection2D, Guidance};
use monoguide_core::kitti::{parse_labels, read_interval_scores, write_results, LabelRecord};
use monoguide_core::refine::{decode_prediction, Decoded};

use crate::args::RefineArgs;
use crate::io::{
    create_dir, ensure_finite, in_file, list_frames, load_config, read_optional, read_text, write_atomic, CmdResult,
    Failure, Reporter,
};

pub fn run(args: &RefineArgs, reporter: &Reporter) -> CmdResult<()> {
    let config = load_config(args.spec.as_deref())?;
    let threshold = args.reject_threshold.unwrap_or(config.reject_threshold);
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Failure::usage(format!("--reject-threshold {threshold} is outside [0, 1]")));
    }
    let spec = config.intervals;
    let frames = list_frames(&args.guidances)?;
    create_dir(&args.out)?;

    let counts: Vec<(usize, usize)> = frames
        .par_iter()
        .map(|f| {
            let guidances = in_file(parse_labels(&read_text(&f.path)?), &f.path)?;
            let score_path = args.scores.join(format!("{}.txt", f.frame));
            let scores = match read_optional(&score_path)? {
                Some(text) => in_file(read_interval_scores(&text, &spec), &score_path)?,
                None => {
                    if !guidances.is_empty() {
                        reporter.warn(format!("frame {}: no score file {}", f.frame, score_path.display()))?;
                    }
                    Vec::new()
                }
            };
            let mut by_id = HashMap::with_capacity(scores.len());
            for (id, s) in scores {
                if id >= guidances.len() {
                    reporter.warn(format!(
                        "{}: score row for guidance {id} but the frame has {}",
                        score_path.display(),
                        guidances.len()
                    ))?;
                } else if by_id.insert(id, s).is_some() {
                    reporter.warn(format!("{}: duplicate score row for guidance {id}", score_path.display()))?;
                }
            }

            let mut refined = Vec::new();
            let mut rejected = 0;
            for (i, rec) in guidances.iter().enumerate() {
                let Some(scores) = by_id.get(&i) else {
                    reporter.warn(format!("frame {}: guidance {i} has no score row, dropped", f.frame))?;
                    continue;
                };
                let guidance = to_guidance(rec).map_err(|e| Failure::data(format!("{}: line {}: {e}", f.path.display(), i + 1)))?;
                match in_file(decode_prediction(&guidance, scores, &spec, threshold), &score_path)? {
                    Decoded::Refined { box3d, confidence } => {
                        let alpha = theta_to_alpha(box3d.theta, box3d.x, box3d.z)
                            .map_err(|e| Failure::data(format!("frame {}: guidance {i}: {e}", f.frame)))?;
                        ensure_finite(&box3d.to_array(), "refined box")?;
                        refined.push(LabelRecord::from_box3d(
                            &rec.kind,
                            &box3d,
                            &guidance.source.box2d,
                            alpha,
                            Some(confidence),
                        ));
                    }
                    Decoded::Rejected => rejected += 1,
                }
            }
            write_atomic(&args.out.join(format!("{}.txt", f.frame)), &write_results(&refined))?;
            Ok((refined.len(), rejected))
        })
        .collect::<CmdResult<_>>()?;

    let kept: usize = counts.iter().map(|c| c.0).sum();
    let rejected: usize = counts.iter().map(|c| c.1).sum();
    eprintln!("refined {kept} guidances, rejected {rejected}, in {} frames", frames.len());
    Ok(())
}

fn to_guidance(rec: &LabelRecord) -> monoguide_core::Result<Guidance> {
    let box3d = rec.to_box3d()?;
    let source = Detection2D::new(rec.to_box2d()?, rec.alpha, rec.kind.clone(), rec.score.unwrap_or(1.0))?;
    // Decoding reads only the box and the detection. Without the calibration the
    // normalized position is taken in the rectified frame, ignoring the camera offset.
    Ok(Guidance {
        box3d,
        source,
        normalized_bottom: (box3d.x / box3d.z, box3d.y / box3d.z),
        depth: box3d.z,
    })
}
