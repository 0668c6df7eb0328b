//! Perspective warping of projected box faces into fixed-size feature grids.
//!
//! Target grid cell `(i, j)` (row, column) sits at continuous target coordinates
//! `(x, y) = (j, i)`, so corner cells land exactly on the quad corners. Each output
//! value is read from the source map at `H⁻¹ (j, i, 1)` with bilinear
//! interpolation. Source samples outside the map contribute zero.

use nalgebra::{Matrix3, Point2, SMatrix, SVector, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{CameraModel, Surface, SurfaceSet};

/// Dense channel-major feature tensor with the network stride that maps image
/// pixels onto its cells.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    stride: f64,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, stride: f64, data: Vec<f64>) -> Result<Self> {
        let expected = channels * height * width;
        if data.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                actual: data.len(),
            });
        }
        if !(stride >= 1.0) {
            return Err(Error::OutOfRange {
                value: stride,
                min: 1.0,
                max: f64::INFINITY,
            });
        }
        Ok(Self {
            channels,
            height,
            width,
            stride,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            stride: 1.0,
            data: vec![0.0; channels * height * width],
        }
    }

    /// Builds a single-stride map by evaluating `f(channel, row, col)`.
    pub fn from_fn(channels: usize, height: usize, width: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for r in 0..height {
                for col in 0..width {
                    data.push(f(c, r, col));
                }
            }
        }
        Self {
            channels,
            height,
            width,
            stride: 1.0,
            data,
        }
    }

    pub fn with_stride(mut self, stride: f64) -> Result<Self> {
        if !(stride >= 1.0) {
            return Err(Error::OutOfRange {
                value: stride,
                min: 1.0,
                max: f64::INFINITY,
            });
        }
        self.stride = stride;
        Ok(self)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn stride(&self) -> f64 {
        self.stride
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, channel: usize, row: usize, col: usize) -> f64 {
        self.data[(channel * self.height + row) * self.width + col]
    }

    pub fn channel(&self, channel: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[channel * n..(channel + 1) * n]
    }

    /// Bilinear sample of one channel at column `u`, row `v`. Neighbours outside
    /// the map count as zero.
    pub fn sample_bilinear(&self, channel: usize, u: f64, v: f64) -> f64 {
        if !u.is_finite() || !v.is_finite() {
            return 0.0;
        }
        let x0 = u.floor();
        let y0 = v.floor();
        let fx = u - x0;
        let fy = v - y0;
        let plane = self.channel(channel);
        let at = |x: f64, y: f64| -> f64 {
            if x < 0.0 || y < 0.0 || x >= self.width as f64 || y >= self.height as f64 {
                0.0
            } else {
                plane[y as usize * self.width + x as usize]
            }
        };
        (1.0 - fy) * ((1.0 - fx) * at(x0, y0) + fx * at(x0 + 1.0, y0))
            + fy * ((1.0 - fx) * at(x0, y0 + 1.0) + fx * at(x0 + 1.0, y0 + 1.0))
    }
}

/// Four ordered corners of a simple quadrilateral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad2D {
    corners: [Point2<f64>; 4],
}

fn cross2(o: &Point2<f64>, a: &Point2<f64>, b: &Point2<f64>) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn segments_cross(a0: &Point2<f64>, a1: &Point2<f64>, b0: &Point2<f64>, b1: &Point2<f64>) -> bool {
    let d1 = cross2(b0, b1, a0);
    let d2 = cross2(b0, b1, a1);
    let d3 = cross2(a0, a1, b0);
    let d4 = cross2(a0, a1, b1);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

impl Quad2D {
    pub fn new(corners: [Point2<f64>; 4]) -> Result<Self> {
        if corners.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::DegenerateQuad("non-finite corner".into()));
        }
        let q = Self { corners };
        if q.signed_area().abs() <= 1e-12 {
            return Err(Error::DegenerateQuad("zero area".into()));
        }
        let c = &corners;
        if segments_cross(&c[0], &c[1], &c[2], &c[3]) || segments_cross(&c[1], &c[2], &c[3], &c[0]) {
            return Err(Error::DegenerateQuad("self-intersecting".into()));
        }
        Ok(q)
    }

    pub fn from_xy(pts: [(f64, f64); 4]) -> Result<Self> {
        Self::new(pts.map(|(x, y)| Point2::new(x, y)))
    }

    pub fn corners(&self) -> &[Point2<f64>; 4] {
        &self.corners
    }

    /// Shoelace area, positive for counter-clockwise order in a y-up frame.
    pub fn signed_area(&self) -> f64 {
        let c = &self.corners;
        0.5 * (0..4)
            .map(|i| {
                let j = (i + 1) % 4;
                c[i].x * c[j].y - c[j].x * c[i].y
            })
            .sum::<f64>()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.corners.map(|p| Point2::from(p.coords * factor)))
    }

    /// Target quad of a `rows × cols` grid: top-left, bottom-left, bottom-right,
    /// top-right, matching [`Surface::corner_indices`].
    pub fn grid(rows: usize, cols: usize) -> Result<Self> {
        let (r, c) = (rows as f64 - 1.0, cols as f64 - 1.0);
        Self::from_xy([(0.0, 0.0), (0.0, r), (c, r), (c, 0.0)])
    }
}

/// Projective map normalized to `H[2][2] = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    matrix: Matrix3<f64>,
}

impl Homography {
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        let s = m[(2, 2)];
        if !s.is_finite() || s.abs() < 1e-15 {
            return Err(Error::DegenerateQuad("homography has vanishing H[2][2]".into()));
        }
        let matrix = m / s;
        if matrix.determinant().abs() <= 1e-12 || matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateQuad("homography is singular".into()));
        }
        Ok(Self { matrix })
    }

    pub fn identity() -> Self {
        Self {
            matrix: Matrix3::identity(),
        }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.matrix
    }

    pub fn inverse(&self) -> Result<Self> {
        let inv = self
            .matrix
            .try_inverse()
            .ok_or_else(|| Error::DegenerateQuad("homography is not invertible".into()))?;
        Self::from_matrix(inv)
    }

    pub fn compose(&self, other: &Homography) -> Result<Self> {
        Self::from_matrix(self.matrix * other.matrix)
    }

    /// Maps a point; `None` when it lands on the line at infinity.
    pub fn apply(&self, p: &Point2<f64>) -> Option<Point2<f64>> {
        let v = self.matrix * Vector3::new(p.x, p.y, 1.0);
        if v.z.abs() < 1e-15 {
            None
        } else {
            Some(Point2::new(v.x / v.z, v.y / v.z))
        }
    }
}

// Similarity transform sending the centroid to the origin with mean distance √2.
fn conditioning(pts: &[Point2<f64>; 4]) -> Matrix3<f64> {
    let centroid = pts.iter().fold(nalgebra::Vector2::zeros(), |a, p| a + p.coords) / 4.0;
    let mean_dist = pts.iter().map(|p| (p.coords - centroid).norm()).sum::<f64>() / 4.0;
    let s = if mean_dist > 1e-12 {
        std::f64::consts::SQRT_2 / mean_dist
    } else {
        1.0
    };
    Matrix3::new(s, 0.0, -s * centroid.x, 0.0, s, -s * centroid.y, 0.0, 0.0, 1.0)
}

/// Direct linear transform for four point pairs: solves the 8×8 system with
/// `h₃₃ = 1` on conditioned coordinates.
pub fn solve_homography(src: &Quad2D, dst: &Quad2D) -> Result<Homography> {
    let ts = conditioning(src.corners());
    let td = conditioning(dst.corners());
    let mut a = SMatrix::<f64, 8, 8>::zeros();
    let mut b = SVector::<f64, 8>::zeros();
    for k in 0..4 {
        let s = ts * Vector3::new(src.corners[k].x, src.corners[k].y, 1.0);
        let d = td * Vector3::new(dst.corners[k].x, dst.corners[k].y, 1.0);
        let (x, y, u, v) = (s.x, s.y, d.x, d.y);
        let r = 2 * k;
        a.row_mut(r).copy_from_slice(&[x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y]);
        a.row_mut(r + 1).copy_from_slice(&[0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y]);
        b[r] = u;
        b[r + 1] = v;
    }
    let lu = a.full_piv_lu();
    if !lu.is_invertible() {
        return Err(Error::DegenerateQuad("rank-deficient correspondence system".into()));
    }
    let h = lu
        .solve(&b)
        .ok_or_else(|| Error::DegenerateQuad("rank-deficient correspondence system".into()))?;
    let normalized = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], 1.0);
    let td_inv = td
        .try_inverse()
        .ok_or_else(|| Error::DegenerateQuad("conditioning failed".into()))?;
    Homography::from_matrix(td_inv * normalized * ts)
}

/// Output grid size, rows × columns. Both must be at least 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSize {
    pub rows: usize,
    pub cols: usize,
}

impl Default for GridSize {
    fn default() -> Self {
        Self { rows: 5, cols: 5 }
    }
}

/// Warps the region under `quad_image` (image pixels) into a `size` grid.
/// The quad is first divided by the map stride.
pub fn warp_region(fm: &FeatureMap, quad_image: &Quad2D, size: GridSize) -> Result<FeatureMap> {
    if size.rows < 2 || size.cols < 2 {
        return Err(Error::DegenerateQuad(format!(
            "output grid {}x{} has coincident corners",
            size.rows, size.cols
        )));
    }
    let quad = quad_image.scaled(1.0 / fm.stride)?;
    let to_grid = solve_homography(&quad, &Quad2D::grid(size.rows, size.cols)?)?;
    let from_grid = to_grid.inverse()?;
    let m = from_grid.matrix();
    let mut out = FeatureMap::zeros(fm.channels, size.rows, size.cols);
    let plane = size.rows * size.cols;
    for i in 0..size.rows {
        for j in 0..size.cols {
            let v = m * Vector3::new(j as f64, i as f64, 1.0);
            if v.z.abs() < 1e-15 {
                continue;
            }
            let (u, w) = (v.x / v.z, v.y / v.z);
            for c in 0..fm.channels {
                out.data[c * plane + i * size.cols + j] = fm.sample_bilinear(c, u, w);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceGrid {
    pub surface: Surface,
    pub grid: FeatureMap,
}

/// Projects each visible face and warps it, keeping the (Top, Front/Back, Side) order.
pub fn extract_surface_features(
    fm: &FeatureMap,
    camera: &CameraModel,
    surfaces: &SurfaceSet,
    size: GridSize,
) -> Result<Vec<SurfaceGrid>> {
    surfaces
        .surfaces
        .iter()
        .map(|s| {
            let mut pts = [Point2::origin(); 4];
            for (dst, c) in pts.iter_mut().zip(&s.corners) {
                *dst = camera.project(c)?;
            }
            let quad = Quad2D::new(pts)?;
            Ok(SurfaceGrid {
                surface: s.surface,
                grid: warp_region(fm, &quad, size)?,
            })
        })
        .collect()
}
