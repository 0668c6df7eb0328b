use std::fmt::Write as _;

use rayon::prelude::*;

use monoguide_core::geometry::Box3D;
use monoguide_core::guidance::{lambda_samples, PriorTable, SizePrior};
use monoguide_core::kitti::{parse_calib, parse_labels, LabelRecord};
use monoguide_core::refine::{delta_statistics, interval_spec_from_stats, match_ground_truth, Dim, LABEL_MATCH_IOU};

use crate::args::StatsArgs;
use crate::io::{in_file, list_frames, load_config, read_optional, read_text, write_atomic, CmdResult, Failure, Reporter};

struct FrameStats {
    pairs: Vec<(Box3D, Box3D)>,
    gts: Vec<(String, Box3D)>,
    lambdas: Vec<(String, f64)>,
    unmatched: usize,
}

pub fn run(args: &StatsArgs, reporter: &Reporter) -> CmdResult<()> {
    let base = load_config(args.config.as_deref())?;
    if args.max_half == 0 {
        return Err(Failure::usage("--max-half must be at least 1"));
    }
    let frames = list_frames(&args.gt)?;
    let per_frame: Vec<FrameStats> = frames
        .par_iter()
        .map(|f| {
            let gts: Vec<LabelRecord> = in_file(parse_labels(&read_text(&f.path)?), &f.path)?
                .into_iter()
                .filter(|r| !r.is_dont_care())
                .collect();
            let g_path = args.guidances.join(format!("{}.txt", f.frame));
            let guidances = match read_optional(&g_path)? {
                Some(text) => in_file(parse_labels(&text), &g_path)?,
                None => Vec::new(),
            };
            let gt_boxes = gts
                .iter()
                .map(|r| Ok((r.kind.clone(), in_file(r.to_box3d(), &f.path)?, in_file(r.to_box2d(), &f.path)?)))
                .collect::<CmdResult<Vec<_>>>()?;

            let mut pairs = Vec::new();
            let mut unmatched = 0;
            for g in &guidances {
                let g3 = in_file(g.to_box3d(), &g_path)?;
                let g2 = in_file(g.to_box2d(), &g_path)?;
                // only same-class ground truths are candidates
                let idx: Vec<usize> = (0..gt_boxes.len()).filter(|&i| gt_boxes[i].0 == g.kind).collect();
                let cands: Vec<_> = idx.iter().map(|&i| gt_boxes[i].2).collect();
                match match_ground_truth(&g2, &cands, LABEL_MATCH_IOU) {
                    Some(k) => pairs.push((g3, gt_boxes[idx[k]].1)),
                    None => unmatched += 1,
                }
            }

            let mut lambdas = Vec::new();
            if let Some(calib_dir) = &args.calib {
                let c_path = calib_dir.join(format!("{}.txt", f.frame));
                let text = read_optional(&c_path)?
                    .ok_or_else(|| Failure::data(format!("frame {}: no calibration file {}", f.frame, c_path.display())))?;
                let camera = in_file(in_file(parse_calib(&text), &c_path)?.camera(&base.calib_key), &c_path)?;
                for (kind, b, _) in &gt_boxes {
                    lambdas.extend(lambda_samples(&camera, std::slice::from_ref(b)).into_iter().map(|l| (kind.clone(), l)));
                }
            }
            Ok(FrameStats {
                pairs,
                gts: gt_boxes.into_iter().map(|(k, b, _)| (k, b)).collect(),
                lambdas,
                unmatched,
            })
        })
        .collect::<CmdResult<_>>()?;

    let pairs: Vec<(Box3D, Box3D)> = per_frame.iter().flat_map(|f| f.pairs.iter().copied()).collect();
    let unmatched: usize = per_frame.iter().map(|f| f.unmatched).sum();
    if unmatched > 0 {
        reporter.warn(format!("{unmatched} guidances matched no ground truth at 2D IoU >= {LABEL_MATCH_IOU}"))?;
    }
    let stats = delta_statistics(&pairs)
        .ok_or_else(|| Failure::data(format!("need at least two matched pairs, found {}", pairs.len())))?;
    for d in Dim::ALL {
        if !(stats[d.index()].std > 0.0) {
            reporter.warn(format!("`{d}` residuals have no spread; keeping the base interval"))?;
        }
    }
    let intervals = interval_spec_from_stats(&stats, args.max_half, &base.intervals)
        .map_err(|e| Failure::data(format!("cannot build an interval spec: {e}")))?;

    let priors = class_priors(&per_frame, &base.priors)?;
    let mut config = base.clone();
    config.intervals = intervals;
    config.priors = priors;

    let mut text = format!("# residual statistics over {} matched pairs\n", pairs.len());
    let _ = writeln!(text, "# {:<6} {:>10} {:>10} {:>10} {:>10}", "dim", "mean", "std", "min", "max");
    for d in Dim::ALL {
        let s = &stats[d.index()];
        let _ = writeln!(text, "# {:<6} {:>10.4} {:>10.4} {:>10.4} {:>10.4}", d.name(), s.mean, s.std, s.min, s.max);
    }
    text.push('\n');
    text.push_str(&config.to_toml());
    match &args.out {
        Some(path) => write_atomic(path, &text)?,
        None => print!("{text}"),
    }

    if let Some(path) = &args.csv {
        let mut csv = String::from("dim,count,mean,std,min,max\n");
        for d in Dim::ALL {
            let s = &stats[d.index()];
            let _ = writeln!(csv, "{},{},{:.6},{:.6},{:.6},{:.6}", d.name(), s.count, s.mean, s.std, s.min, s.max);
        }
        write_atomic(path, &csv)?;
    }
    Ok(())
}

/// Mean size per ground-truth class; the shift fraction is the median measurement
/// when calibration was given and the base prior's value otherwise.
fn class_priors(frames: &[FrameStats], base: &PriorTable) -> CmdResult<PriorTable> {
    let mut classes: Vec<String> = frames.iter().flat_map(|f| f.gts.iter().map(|(k, _)| k.clone())).collect();
    classes.sort();
    classes.dedup();
    let mut out = Vec::new();
    for class in classes {
        let boxes: Vec<Box3D> = frames
            .iter()
            .flat_map(|f| f.gts.iter().filter(|(k, _)| *k == class).map(|(_, b)| *b))
            .collect();
        let n = boxes.len() as f64;
        let mean = |f: fn(&Box3D) -> f64| boxes.iter().map(f).sum::<f64>() / n;
        let mut lambdas: Vec<f64> = frames
            .iter()
            .flat_map(|f| f.lambdas.iter().filter(|(k, _)| *k == class).map(|(_, l)| *l))
            .collect();
        let lambda = if lambdas.is_empty() {
            base.get(&class).map_or(SizePrior::default_car().lambda, |p| p.lambda)
        } else {
            lambdas.sort_by(f64::total_cmp);
            let m = lambdas.len();
            if m % 2 == 1 {
                lambdas[m / 2]
            } else {
                0.5 * (lambdas[m / 2 - 1] + lambdas[m / 2])
            }
        };
        let prior = SizePrior::new(class.clone(), mean(|b| b.w), mean(|b| b.h), mean(|b| b.l), lambda)
            .map_err(|e| Failure::data(format!("class {class}: {e}")))?;
        out.push(prior);
    }
    PriorTable::new(out).map_err(|e| Failure::data(format!("{e}")))
}
