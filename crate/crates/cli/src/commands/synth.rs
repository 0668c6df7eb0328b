use rayon::prelude::*;

use monoguide_core::kitti::{write_calib, write_results, CalibFile, LabelRecord};
use monoguide_core::synth::{generate_scene, perfect_detections, DetectionMode, SceneSpec};

use crate::args::{DetectionModeArg, SynthArgs};
use crate::io::{create_dir, read_text, write_atomic, CmdResult, DataContext, Failure};

pub fn run(args: &SynthArgs) -> CmdResult<()> {
    let text = read_text(&args.spec)?;
    let spec: SceneSpec = SceneSpec::from_toml(&text).data_ctx(format!("{}", args.spec.display()))?;
    let scene = generate_scene(&spec).data_ctx(format!("{}", args.spec.display()))?;

    let label_dir = args.out.join("label_2");
    let calib_dir = args.out.join("calib");
    create_dir(&label_dir)?;
    create_dir(&calib_dir)?;

    let detections = match args.detections {
        None => None,
        Some(mode) => {
            let mode = match mode {
                DetectionModeArg::ExactLambda => DetectionMode::ExactLambda,
                DetectionModeArg::TightBbox => DetectionMode::TightBbox,
            };
            let dets = perfect_detections(&scene, mode, spec.prior.lambda)
                .map_err(|e| Failure::data(format!("cannot build detections: {e}")))?;
            create_dir(&args.out.join("detections"))?;
            Some(dets)
        }
    };

    let calib = write_calib(&CalibFile::from_camera("P2", &scene.camera));
    let per_frame = scene.objects_per_frame;
    scene
        .frames()
        .enumerate()
        .collect::<Vec<_>>()
        .par_iter()
        .try_for_each(|(i, objects)| {
            let name = format!("{i:06}.txt");
            let labels: Vec<LabelRecord> = objects
                .iter()
                .map(|gt| {
                    let mut r = LabelRecord::from_box3d(&gt.class_name, &gt.box3d, &gt.box2d, gt.alpha, None);
                    r.truncated = gt.truncation;
                    r.occluded = gt.occlusion;
                    r
                })
                .collect();
            write_atomic(&label_dir.join(&name), &write_results(&labels))?;
            write_atomic(&calib_dir.join(&name), &calib)?;
            if let Some(dets) = &detections {
                let start = i * per_frame;
                let records: Vec<LabelRecord> = dets[start..start + objects.len()]
                    .iter()
                    .zip(objects.iter())
                    .map(|(d, gt)| {
                        // 2D detection lines carry the 3D fields as zeros
                        let mut r = LabelRecord::from_box3d(&d.class_name, &gt.box3d, &d.box2d, d.alpha, Some(d.score));
                        r.dimensions = [0.0; 3];
                        r.location = [0.0; 3];
                        r.rotation_y = 0.0;
                        r
                    })
                    .collect();
                write_atomic(&args.out.join("detections").join(&name), &write_results(&records))?;
            }
            Ok(())
        })?;

    eprintln!(
        "wrote {} objects in {} frames to {}",
        scene.objects.len(),
        scene.objects.len().div_ceil(per_frame),
        args.out.display()
    );
    Ok(())
}
