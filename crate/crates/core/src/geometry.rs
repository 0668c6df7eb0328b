//! Box parameterization, pinhole projection and the observation-angle relations.
//!
//! Coordinates follow the KITTI rectified camera frame: x to the right, y pointing
//! down, z forward. A [`Box3D`] is anchored at the center of its bottom face and
//! rotated about the y axis only. In the box's local frame the length runs along
//! +x (the heading), the width along z with +z on the object's left.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Matrix3x4, Point2, Point3, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Homogeneous depths at or below this are treated as behind the camera.
pub const MIN_PROJECTION_DEPTH: f64 = 1e-9;

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a - 2.0 * PI
    } else {
        a
    }
}

/// Oriented 3D box: size, bottom-face center and yaw about the y axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box3D {
    pub w: f64,
    pub h: f64,
    pub l: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub theta: f64,
}

impl Box3D {
    /// Builds a box, rejecting non-positive sizes and non-finite values. `theta` is wrapped.
    pub fn new(w: f64, h: f64, l: f64, x: f64, y: f64, z: f64, theta: f64) -> Result<Self> {
        let b = Self {
            w,
            h,
            l,
            x,
            y,
            z,
            theta: wrap_angle(theta),
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.w, self.h, self.l, self.x, self.y, self.z, self.theta];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidBox(format!("non-finite parameter in {self:?}")));
        }
        if self.w <= 0.0 || self.h <= 0.0 || self.l <= 0.0 {
            return Err(Error::InvalidBox(format!(
                "sizes must be positive (w={}, h={}, l={})",
                self.w, self.h, self.l
            )));
        }
        Ok(())
    }

    /// Bottom-face center.
    pub fn location(&self) -> Point3<f64> {
        Point3::new(self.x, self.y, self.z)
    }

    /// Volumetric center (half the height above the bottom face).
    pub fn center(&self) -> Point3<f64> {
        Point3::new(self.x, self.y - self.h / 2.0, self.z)
    }

    /// Top-face center.
    pub fn top_center(&self) -> Point3<f64> {
        Point3::new(self.x, self.y - self.h, self.z)
    }

    pub fn volume(&self) -> f64 {
        self.w * self.h * self.l
    }

    /// Parameters in `(w, h, l, x, y, z, theta)` order.
    pub fn to_array(&self) -> [f64; 7] {
        [self.w, self.h, self.l, self.x, self.y, self.z, self.theta]
    }

    pub fn from_array(p: [f64; 7]) -> Result<Self> {
        Self::new(p[0], p[1], p[2], p[3], p[4], p[5], p[6])
    }

    /// Rotation about the camera y axis taking local box coordinates to camera coordinates.
    pub fn rotation(&self) -> Matrix3<f64> {
        yaw_rotation(self.theta)
    }

    /// The 8 corners. Indices 0..4 are the bottom face, 4..8 the top face, each
    /// ordered front-left, rear-left, rear-right, front-right (counter-clockwise
    /// seen from above).
    pub fn corners(&self) -> [Point3<f64>; 8] {
        corners3d(self)
    }

    /// Bird's-eye-view footprint in the x-z plane, same order as the bottom corners.
    pub fn bev_corners(&self) -> [Point2<f64>; 4] {
        let c = self.corners();
        [0, 1, 2, 3].map(|i| Point2::new(c[i].x, c[i].z))
    }

    /// Tests whether a camera-frame point lies inside (or on) the box.
    pub fn contains(&self, p: &Point3<f64>) -> bool {
        let d = p - self.location();
        let local = self.rotation().transpose() * d;
        local.x.abs() <= self.l / 2.0
            && local.z.abs() <= self.w / 2.0
            && local.y <= 0.0
            && local.y >= -self.h
    }
}

pub fn yaw_rotation(theta: f64) -> Matrix3<f64> {
    let (s, c) = theta.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

/// See [`Box3D::corners`] for the ordering.
pub fn corners3d(b: &Box3D) -> [Point3<f64>; 8] {
    let (hl, hw) = (b.l / 2.0, b.w / 2.0);
    let xs = [hl, -hl, -hl, hl];
    let zs = [hw, hw, -hw, -hw];
    let rot = b.rotation();
    let origin = b.location();
    std::array::from_fn(|i| {
        let y = if i < 4 { 0.0 } else { -b.h };
        origin + rot * Vector3::new(xs[i % 4], y, zs[i % 4])
    })
}

/// Axis-aligned image box given by center and size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box2D {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl Box2D {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        if !(w > 0.0 && h > 0.0) || !cx.is_finite() || !cy.is_finite() || !w.is_finite() || !h.is_finite() {
            return Err(Error::InvalidBox(format!(
                "2D box needs finite center and positive size (w={w}, h={h})"
            )));
        }
        Ok(Self { cx, cy, w, h })
    }

    pub fn from_ltrb(left: f64, top: f64, right: f64, bottom: f64) -> Result<Self> {
        Self::new(
            (left + right) / 2.0,
            (top + bottom) / 2.0,
            right - left,
            bottom - top,
        )
    }

    pub fn left(&self) -> f64 {
        self.cx - self.w / 2.0
    }

    pub fn right(&self) -> f64 {
        self.cx + self.w / 2.0
    }

    pub fn top(&self) -> f64 {
        self.cy - self.h / 2.0
    }

    pub fn bottom(&self) -> f64 {
        self.cy + self.h / 2.0
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn contains(&self, p: &Point2<f64>, tol: f64) -> bool {
        p.x >= self.left() - tol
            && p.x <= self.right() + tol
            && p.y >= self.top() - tol
            && p.y <= self.bottom() + tol
    }

    pub fn iou(&self, other: &Box2D) -> f64 {
        let iw = (self.right().min(other.right()) - self.left().max(other.left())).max(0.0);
        let ih = (self.bottom().min(other.bottom()) - self.top().max(other.top())).max(0.0);
        let inter = iw * ih;
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }
}

/// Pinhole camera given by a 3x4 projection matrix `P = K [I | t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    projection: Matrix3x4<f64>,
    intrinsics: Matrix3<f64>,
    intrinsics_inv: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl CameraModel {
    /// Builds the camera from a row-major 3x4 matrix. The matrix is scaled so that
    /// `K[2][2] == 1`.
    pub fn from_projection(rows: [f64; 12]) -> Result<Self> {
        let p = Matrix3x4::from_row_slice(&rows);
        Self::from_matrix(p)
    }

    pub fn from_matrix(p: Matrix3x4<f64>) -> Result<Self> {
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularIntrinsics("non-finite entry".into()));
        }
        let k22 = p[(2, 2)];
        if k22.abs() < 1e-12 {
            return Err(Error::SingularIntrinsics("K[2][2] is zero".into()));
        }
        let projection = p / k22;
        let intrinsics: Matrix3<f64> = projection.fixed_view::<3, 3>(0, 0).into_owned();
        if intrinsics[(0, 0)] <= 0.0 || intrinsics[(1, 1)] <= 0.0 {
            return Err(Error::SingularIntrinsics(format!(
                "focal lengths must be positive (fx={}, fy={})",
                intrinsics[(0, 0)],
                intrinsics[(1, 1)]
            )));
        }
        let intrinsics_inv = intrinsics
            .try_inverse()
            .filter(|_| intrinsics.determinant().abs() > 1e-12)
            .ok_or_else(|| Error::SingularIntrinsics("K is not invertible".into()))?;
        let translation = intrinsics_inv * projection.column(3);
        Ok(Self {
            projection,
            intrinsics,
            intrinsics_inv,
            translation,
        })
    }

    /// Camera with zero translation column.
    pub fn from_intrinsics(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        Self::from_projection([fx, 0.0, cx, 0.0, 0.0, fy, cy, 0.0, 0.0, 0.0, 1.0, 0.0])
    }

    pub fn projection(&self) -> &Matrix3x4<f64> {
        &self.projection
    }

    pub fn projection_rows(&self) -> [f64; 12] {
        let p = &self.projection;
        std::array::from_fn(|i| p[(i / 4, i % 4)])
    }

    pub fn intrinsics(&self) -> &Matrix3<f64> {
        &self.intrinsics
    }

    pub fn intrinsics_inv(&self) -> &Matrix3<f64> {
        &self.intrinsics_inv
    }

    /// `K⁻¹ p₄`: offset added to camera-frame points before applying `K`.
    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn fx(&self) -> f64 {
        self.intrinsics[(0, 0)]
    }

    pub fn fy(&self) -> f64 {
        self.intrinsics[(1, 1)]
    }

    pub fn cx(&self) -> f64 {
        self.intrinsics[(0, 2)]
    }

    pub fn cy(&self) -> f64 {
        self.intrinsics[(1, 2)]
    }

    pub fn project(&self, point: &Point3<f64>) -> Result<Point2<f64>> {
        let h = self.projection * Vector4::new(point.x, point.y, point.z, 1.0);
        if h.z <= MIN_PROJECTION_DEPTH {
            return Err(Error::PointBehindCamera { depth: h.z });
        }
        Ok(Point2::new(h.x / h.z, h.y / h.z))
    }

    /// Tight axis-aligned box around the 8 projected corners.
    pub fn project_box(&self, b: &Box3D) -> Result<Box2D> {
        let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for c in b.corners() {
            let p = self.project(&c)?;
            lo = lo.inf(&p);
            hi = hi.sup(&p);
        }
        Box2D::from_ltrb(lo.x, lo.y, hi.x, hi.y)
    }
}

/// Global yaw from observation angle: `θ = α + atan2(x, z)`, wrapped.
pub fn alpha_to_theta(alpha: f64, x: f64, z: f64) -> Result<f64> {
    if z <= 0.0 || !z.is_finite() {
        return Err(Error::InvalidDepth(z));
    }
    Ok(wrap_angle(alpha + x.atan2(z)))
}

/// Observation angle from global yaw: `α = θ − atan2(x, z)`, wrapped.
pub fn theta_to_alpha(theta: f64, x: f64, z: f64) -> Result<f64> {
    if z <= 0.0 || !z.is_finite() {
        return Err(Error::InvalidDepth(z));
    }
    Ok(wrap_angle(theta - x.atan2(z)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Surface {
    Top,
    Front,
    Back,
    LeftSide,
    RightSide,
}

impl Surface {
    /// Corner indices (into [`corners3d`]) ordered top-left, bottom-left,
    /// bottom-right, top-right as seen from outside the box. The winding is
    /// counter-clockwise around the outward normal. For `Top` the viewer looks down
    /// with the heading pointing up.
    pub fn corner_indices(self) -> [usize; 4] {
        match self {
            Surface::Top => [4, 5, 6, 7],
            Surface::Front => [7, 3, 0, 4],
            Surface::Back => [5, 1, 2, 6],
            Surface::LeftSide => [4, 0, 1, 5],
            Surface::RightSide => [6, 2, 3, 7],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Surface::Top => "top",
            Surface::Front => "front",
            Surface::Back => "back",
            Surface::LeftSide => "left",
            Surface::RightSide => "right",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceQuad {
    pub surface: Surface,
    pub corners: [Point3<f64>; 4],
}

/// Visible faces in the fixed order (Top, Front-or-Back, Side).
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSet {
    pub surfaces: Vec<SurfaceQuad>,
}

impl SurfaceSet {
    pub fn tags(&self) -> Vec<Surface> {
        self.surfaces.iter().map(|s| s.surface).collect()
    }

    pub fn len(&self) -> usize {
        self.surfaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surfaces.is_empty()
    }
}

/// Faces visible for observation angle `alpha`. Strict inequalities: `α = 0` shows
/// neither front nor back, `α = ±π/2` resolves to the left side.
pub fn visible_surfaces(b: &Box3D, alpha: f64) -> SurfaceSet {
    let alpha = wrap_angle(alpha);
    let mut tags = vec![Surface::Top];
    if alpha > 0.0 {
        tags.push(Surface::Front);
    } else if alpha < 0.0 {
        tags.push(Surface::Back);
    }
    if alpha > -PI / 2.0 && alpha < PI / 2.0 {
        tags.push(Surface::RightSide);
    } else {
        tags.push(Surface::LeftSide);
    }
    let corners = b.corners();
    let surfaces = tags
        .into_iter()
        .map(|surface| SurfaceQuad {
            surface,
            corners: surface.corner_indices().map(|i| corners[i]),
        })
        .collect();
    SurfaceSet { surfaces }
}
