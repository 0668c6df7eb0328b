use std::fmt::Write as _;

use rayon::prelude::*;

use monoguide_core::kitti::parse_labels;
use monoguide_core::metrics::{
    evaluate, recall, Difficulty, DifficultyTable, EvalOptions, FrameData, Interpolation, MatchCriterion, PrCurve,
};

use crate::args::{DifficultyArg, EvalArgs, Metric};
use crate::io::{in_file, list_frames, load_config, read_optional, read_text, write_atomic, CmdResult, Failure, Reporter};

/// Which number a table row reports.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Quantity {
    Ap,
    Aos,
    Recall,
}

#[derive(Debug, Clone, PartialEq)]
struct Row {
    label: String,
    criterion: MatchCriterion,
    quantity: Quantity,
}

fn iou_label(t: f64) -> String {
    format!("IoU={t}")
}

fn dist_label(t: f64) -> String {
    format!("{t}m")
}

fn rows_for(args: &EvalArgs) -> CmdResult<Vec<Row>> {
    let row = |label: String, criterion, quantity| Row {
        label,
        criterion,
        quantity,
    };
    let rows = match args.metric {
        Metric::Ap3d => {
            if !args.dist.is_empty() {
                return Err(Failure::usage("--metric ap3d takes --iou, not --dist"));
            }
            let thresholds = if args.iou.is_empty() { vec![0.5, 0.7] } else { args.iou.clone() };
            thresholds
                .into_iter()
                .map(|t| row(format!("AP_3D@{}", iou_label(t)), MatchCriterion::Iou3d(t), Quantity::Ap))
                .collect()
        }
        Metric::Alp => {
            if !args.iou.is_empty() {
                return Err(Failure::usage("--metric alp takes --dist, not --iou"));
            }
            let thresholds = if args.dist.is_empty() { vec![1.0, 2.0] } else { args.dist.clone() };
            thresholds
                .into_iter()
                .map(|t| {
                    row(
                        format!("ALP@{}", dist_label(t)),
                        MatchCriterion::CenterDistance(t),
                        Quantity::Ap,
                    )
                })
                .collect()
        }
        Metric::Aos => {
            if !args.dist.is_empty() {
                return Err(Failure::usage("--metric aos takes --iou (2D), not --dist"));
            }
            let t = match args.iou.as_slice() {
                [] => 0.5,
                [t] => *t,
                _ => return Err(Failure::usage("--metric aos takes a single --iou")),
            };
            vec![
                row(format!("AP_2D@{}", iou_label(t)), MatchCriterion::Iou2d(t), Quantity::Ap),
                row("AOS".into(), MatchCriterion::Iou2d(t), Quantity::Aos),
            ]
        }
        Metric::Recall => {
            let loc = |t: f64| {
                row(
                    format!("Recall_loc@{}", dist_label(t)),
                    MatchCriterion::CenterDistance(t),
                    Quantity::Recall,
                )
            };
            let r3d = |t: f64| row(format!("Recall_3D@{}", iou_label(t)), MatchCriterion::Iou3d(t), Quantity::Recall);
            match (args.dist.is_empty(), args.iou.is_empty()) {
                (true, true) => vec![loc(1.0), loc(2.0), r3d(0.5)],
                (false, _) => args.dist.iter().map(|t| loc(*t)).collect(),
                (_, false) => args.iou.iter().map(|t| r3d(*t)).collect(),
            }
        }
    };
    for r in &rows {
        let t = match r.criterion {
            MatchCriterion::Iou3d(t) | MatchCriterion::Iou2d(t) => {
                if !(t > 0.0 && t <= 1.0) {
                    return Err(Failure::usage(format!("IoU threshold {t} is outside (0, 1]")));
                }
                t
            }
            MatchCriterion::CenterDistance(t) => t,
        };
        if !(t.is_finite() && t > 0.0) {
            return Err(Failure::usage(format!("threshold {t} must be positive")));
        }
    }
    Ok(rows)
}

fn difficulty(d: DifficultyArg) -> Difficulty {
    match d {
        DifficultyArg::Easy => Difficulty::Easy,
        DifficultyArg::Moderate => Difficulty::Moderate,
        DifficultyArg::Hard => Difficulty::Hard,
    }
}

fn load_frames(args: &EvalArgs, reporter: &Reporter) -> CmdResult<Vec<FrameData>> {
    let gt_files = list_frames(&args.gt)?;
    if gt_files.is_empty() {
        return Err(Failure::data(format!("no ground-truth files in {}", args.gt.display())));
    }
    for r in list_frames(&args.results)? {
        if !args.gt.join(format!("{}.txt", r.frame)).exists() {
            reporter.warn(format!("result frame {} has no ground truth and is ignored", r.frame))?;
        }
    }
    gt_files
        .par_iter()
        .map(|f| {
            let gts = in_file(parse_labels(&read_text(&f.path)?), &f.path)?
                .iter()
                .map(|r| in_file(r.to_ground_truth(), &f.path))
                .collect::<CmdResult<Vec<_>>>()?;
            let res_path = args.results.join(format!("{}.txt", f.frame));
            let dets = match read_optional(&res_path)? {
                Some(text) => in_file(parse_labels(&text), &res_path)?
                    .iter()
                    .map(|r| in_file(r.to_detection_result(), &res_path))
                    .collect::<CmdResult<Vec<_>>>()?,
                None => Vec::new(),
            };
            Ok(FrameData { gts, dets })
        })
        .collect()
}

struct Cell {
    value: f64,
    curve: Option<PrCurve>,
}

fn compute(frames: &[FrameData], row: &Row, d: Difficulty, args: &EvalArgs, table: DifficultyTable) -> Cell {
    let interpolation = if args.points == 40 {
        Interpolation::FortyPoint
    } else {
        Interpolation::ElevenPoint
    };
    let opts = EvalOptions::new(args.class.clone(), d, row.criterion)
        .with_interpolation(interpolation)
        .with_table(table);
    match row.quantity {
        Quantity::Recall => Cell {
            value: recall(frames, &opts),
            curve: None,
        },
        Quantity::Ap | Quantity::Aos => {
            let report = evaluate(frames, &opts);
            Cell {
                value: if row.quantity == Quantity::Ap { report.ap } else { report.aos },
                curve: Some(report.curve),
            }
        }
    }
}

pub fn run(args: &EvalArgs, reporter: &Reporter) -> CmdResult<()> {
    let rows = rows_for(args)?;
    let table = load_config(args.config.as_deref())?.difficulty;
    let columns: Vec<Difficulty> = if args.difficulty.is_empty() {
        Difficulty::LEVELS.to_vec()
    } else {
        let mut c: Vec<Difficulty> = args.difficulty.iter().map(|d| difficulty(*d)).collect();
        c.sort();
        c.dedup();
        c
    };
    let frames = load_frames(args, reporter)?;

    let jobs: Vec<(usize, usize)> = (0..rows.len())
        .flat_map(|r| (0..columns.len()).map(move |c| (r, c)))
        .collect();
    let cells: Vec<Cell> = jobs
        .par_iter()
        .map(|&(r, c)| compute(&frames, &rows[r], columns[c], args, table))
        .collect();
    let cell = |r: usize, c: usize| &cells[r * columns.len() + c];

    let label_width = rows.iter().map(|r| r.label.len()).max().unwrap_or(0).max(args.class.len() + 12);
    let mut out = format!("{:<label_width$}", format!("{} ({}-point)", args.class, args.points));
    for d in &columns {
        let _ = write!(out, " {:>9}", d.name());
    }
    out.push('\n');
    for (ri, row) in rows.iter().enumerate() {
        let _ = write!(out, "{:<label_width$}", row.label);
        for ci in 0..columns.len() {
            let _ = write!(out, " {:>9.4}", cell(ri, ci).value);
        }
        out.push('\n');
    }
    print!("{out}");

    if let Some(path) = &args.csv {
        let mut csv = String::from("metric");
        for d in &columns {
            let _ = write!(csv, ",{}", d.name().to_lowercase());
        }
        csv.push('\n');
        for (ri, row) in rows.iter().enumerate() {
            csv.push_str(&row.label);
            for ci in 0..columns.len() {
                let _ = write!(csv, ",{:.6}", cell(ri, ci).value);
            }
            csv.push('\n');
        }
        write_atomic(path, &csv)?;
    }

    if let Some(path) = &args.pr_csv {
        let mut csv = String::from("metric,difficulty,score,recall,precision,similarity\n");
        for (ri, row) in rows.iter().enumerate() {
            for (ci, d) in columns.iter().enumerate() {
                if let Some(curve) = &cell(ri, ci).curve {
                    for p in &curve.points {
                        let _ = writeln!(
                            csv,
                            "{},{},{:.6},{:.6},{:.6},{:.6}",
                            row.label,
                            d.name().to_lowercase(),
                            p.score,
                            p.recall,
                            p.precision,
                            p.similarity
                        );
                    }
                }
            }
        }
        write_atomic(path, &csv)?;
    }
    Ok(())
}
