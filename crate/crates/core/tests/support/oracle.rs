//! Reference implementations that share no code path with the library.
#![allow(dead_code)]

use monoguide_core::geometry::Box3D;
use nalgebra::{DMatrix, Matrix3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Point-in-box test written directly from the box parameters.
pub fn inside(b: &Box3D, p: [f64; 3]) -> bool {
    let (dx, dz) = (p[0] - b.x, p[2] - b.z);
    let (s, c) = b.theta.sin_cos();
    // inverse of the yaw rotation
    let lx = c * dx - s * dz;
    let lz = s * dx + c * dz;
    lx.abs() <= b.l / 2.0 && lz.abs() <= b.w / 2.0 && p[1] <= b.y && p[1] >= b.y - b.h
}

/// Monte-Carlo 3D IoU: samples uniformly inside `a` and counts hits in `b`.
pub fn monte_carlo_iou(a: &Box3D, b: &Box3D, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (s, c) = a.theta.sin_cos();
    let mut hits = 0usize;
    for _ in 0..samples {
        let lx = rng.random_range(-a.l / 2.0..a.l / 2.0);
        let lz = rng.random_range(-a.w / 2.0..a.w / 2.0);
        let ly = rng.random_range(-a.h..0.0);
        let p = [a.x + c * lx + s * lz, a.y + ly, a.z - s * lx + c * lz];
        if inside(b, p) {
            hits += 1;
        }
    }
    let va = a.w * a.h * a.l;
    let vb = b.w * b.h * b.l;
    let inter = va * hits as f64 / samples as f64;
    inter / (va + vb - inter)
}

/// Homography by the null space of the 8×9 DLT system (SVD), `H[2][2] = 1`.
pub fn svd_homography(src: &[(f64, f64); 4], dst: &[(f64, f64); 4]) -> Matrix3<f64> {
    let mut a = DMatrix::<f64>::zeros(9, 9);
    for k in 0..4 {
        let (x, y) = src[k];
        let (u, v) = dst[k];
        let r0 = [-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u];
        let r1 = [0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v];
        for j in 0..9 {
            a[(2 * k, j)] = r0[j];
            a[(2 * k + 1, j)] = r1[j];
        }
    }
    // the zero 9th row keeps the SVD square so the null vector is returned
    let svd = a.svd(false, true);
    let vt = svd.v_t.expect("v_t");
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .unwrap();
    let h = vt.row(idx);
    let m = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    m / m[(2, 2)]
}

pub fn apply_h(m: &Matrix3<f64>, p: (f64, f64)) -> (f64, f64) {
    let x = m[(0, 0)] * p.0 + m[(0, 1)] * p.1 + m[(0, 2)];
    let y = m[(1, 0)] * p.0 + m[(1, 1)] * p.1 + m[(1, 2)];
    let w = m[(2, 0)] * p.0 + m[(2, 1)] * p.1 + m[(2, 2)];
    (x / w, y / w)
}

/// Per-pixel reference warp of one channel. Bilinear interpolation is written as
/// a tent-kernel sum over every source pixel, which is zero-padded by construction.
pub fn reference_warp(
    plane: &[f64],
    height: usize,
    width: usize,
    quad: &[(f64, f64); 4],
    rows: usize,
    cols: usize,
) -> Vec<f64> {
    let (r, c) = ((rows - 1) as f64, (cols - 1) as f64);
    let grid = [(0.0, 0.0), (0.0, r), (c, r), (c, 0.0)];
    // grid -> source directly
    let back = svd_homography(&grid, quad);
    let mut out = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            let (u, v) = apply_h(&back, (j as f64, i as f64));
            let mut acc = 0.0;
            for y in 0..height {
                let wy = (1.0 - (v - y as f64).abs()).max(0.0);
                if wy == 0.0 {
                    continue;
                }
                for x in 0..width {
                    let wx = (1.0 - (u - x as f64).abs()).max(0.0);
                    acc += wx * wy * plane[y * width + x];
                }
            }
            out[i * cols + j] = acc;
        }
    }
    out
}

/// Random convex quad: jittered points on a circle, counter-clockwise in a y-down frame
/// ordered to match the grid corners (top-left, bottom-left, bottom-right, top-right).
pub fn random_convex_quad(rng: &mut ChaCha8Rng, cx: f64, cy: f64, radius: f64) -> [(f64, f64); 4] {
    // angles in image coordinates (y down): top-left ~ 225°, bottom-left ~ 135°, ...
    let base = [225.0f64, 135.0, 45.0, 315.0];
    base.map(|deg| {
        let a = (deg + rng.random_range(-25.0..25.0)).to_radians();
        let r = radius * rng.random_range(0.6..1.0);
        (cx + r * a.cos(), cy + r * a.sin())
    })
}

/// Random box near the origin of a local cluster, for overlap tests.
pub fn random_box(rng: &mut ChaCha8Rng, center: [f64; 3], spread: f64) -> Box3D {
    Box3D::new(
        rng.random_range(0.5..2.5),
        rng.random_range(0.5..2.5),
        rng.random_range(0.5..5.0),
        center[0] + rng.random_range(-spread..spread),
        center[1] + rng.random_range(-spread / 3.0..spread / 3.0),
        center[2] + rng.random_range(-spread..spread),
        rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
    )
    .unwrap()
}

/// Central finite difference.
pub fn central_diff(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}
