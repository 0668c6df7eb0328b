use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};

use monoguide_bench::{box_pairs, detections, eval_frames, feature_map, scene};
use monoguide_core::geometry::visible_surfaces;
use monoguide_core::metrics::{evaluate, iou3d, Difficulty, EvalOptions, MatchCriterion};
use monoguide_core::warp::{extract_surface_features, warp_region, GridSize, Quad2D};
use monoguide_core::{generate_guidance, theta_to_alpha, PriorTable};

fn bench_iou(c: &mut Criterion) {
    let pairs = box_pairs(1000, 1);
    let mut group = c.benchmark_group("iou3d");
    group.throughput(Throughput::Elements(pairs.len() as u64));
    group.bench_function("1000 pairs", |b| {
        b.iter(|| pairs.iter().map(|(a, q)| iou3d(black_box(a), black_box(q))).sum::<f64>())
    });
    group.finish();
}

fn bench_evaluate(c: &mut Criterion) {
    let frames = eval_frames(2000, 2);
    let mut group = c.benchmark_group("evaluate");
    for (name, criterion) in [
        ("ap3d", MatchCriterion::Iou3d(0.7)),
        ("alp", MatchCriterion::CenterDistance(1.0)),
        ("aos", MatchCriterion::Iou2d(0.5)),
    ] {
        let opts = EvalOptions::new("Car", Difficulty::Moderate, criterion);
        group.bench_function(name, |b| b.iter(|| evaluate(black_box(&frames), &opts).ap));
    }
    group.finish();
}

fn bench_warp(c: &mut Criterion) {
    let fm = feature_map(16, 4.0);
    let quad = Quad2D::from_xy([(500.0, 150.0), (490.0, 240.0), (640.0, 250.0), (630.0, 140.0)]).unwrap();
    let mut group = c.benchmark_group("warp");
    group.bench_function("warp_region 16ch 5x5", |b| {
        b.iter(|| warp_region(black_box(&fm), &quad, GridSize::default()).unwrap())
    });
    let s = scene(64, 3);
    group.bench_function("visible faces x64", |b| {
        b.iter_batched(
            || s.objects.clone(),
            |objects| {
                for gt in &objects {
                    let alpha = theta_to_alpha(gt.box3d.theta, gt.box3d.x, gt.box3d.z).unwrap();
                    let set = visible_surfaces(&gt.box3d, alpha);
                    black_box(extract_surface_features(&fm, &s.camera, &set, GridSize::default()).ok());
                }
            },
            BatchSize::SmallInput,
        )
    });
    group.finish();
}

fn bench_guidance(c: &mut Criterion) {
    let s = scene(1000, 4);
    let dets = detections(&s);
    let priors = PriorTable::default();
    let mut group = c.benchmark_group("guidance");
    group.throughput(Throughput::Elements(dets.len() as u64));
    group.bench_function("generate_guidance x1000", |b| {
        b.iter(|| {
            dets.iter()
                .filter_map(|d| generate_guidance(&s.camera, black_box(d), &priors).ok())
                .count()
        })
    });
    group.finish();
}

criterion_group!(benches, bench_iou, bench_evaluate, bench_warp, bench_guidance);
criterion_main!(benches);
