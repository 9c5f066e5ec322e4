//! Planar projective transforms and their estimation from point correspondences.

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::shapes::Point2;
use crate::error::GeometryError;

/// Depth below which a mapped point is treated as lying on the line at infinity.
const HORIZON_EPS: f64 = 1e-12;

/// Invertible 3x3 projective transform, stored row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 3]; 3]", into = "[[f64; 3]; 3]")]
pub struct Homography {
    h: [[f64; 3]; 3],
}

impl Homography {
    pub const IDENTITY: Homography = Homography { h: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] };

    /// Validates invertibility and rescales so that `h[2][2] == 1` when it is non-zero.
    pub fn new(rows: [[f64; 3]; 3]) -> Result<Self, GeometryError> {
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(GeometryError::InvalidGeometry("non-finite homography entry".into()));
        }
        let m = to_matrix(&rows);
        let scale = m.norm();
        if scale == 0.0 || m.determinant().abs() <= 1e-12 * scale.powi(3) {
            return Err(GeometryError::Mapping("homography is singular".into()));
        }
        let m = if rows[2][2] != 0.0 { m / rows[2][2] } else { m };
        Ok(Self { h: from_matrix(&m) })
    }

    pub fn translation(dx: f64, dy: f64) -> Self {
        Self { h: [[1.0, 0.0, dx], [0.0, 1.0, dy], [0.0, 0.0, 1.0]] }
    }

    pub fn rows(&self) -> [[f64; 3]; 3] {
        self.h
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        to_matrix(&self.h)
    }

    pub fn inverse(&self) -> Result<Homography, GeometryError> {
        let inv =
            self.matrix().try_inverse().ok_or_else(|| GeometryError::Mapping("homography is not invertible".into()))?;
        Homography::new(from_matrix(&inv))
    }

    /// `self` applied after `first`.
    pub fn compose(&self, first: &Homography) -> Result<Homography, GeometryError> {
        Homography::new(from_matrix(&(self.matrix() * first.matrix())))
    }

    /// Projective mapping with homogeneous division.
    pub fn apply(&self, p: Point2) -> Result<Point2, GeometryError> {
        let h = &self.h;
        let w = h[2][0] * p.x + h[2][1] * p.y + h[2][2];
        if w.abs() < HORIZON_EPS || !w.is_finite() {
            return Err(GeometryError::Mapping(format!("point ({}, {}) maps to the line at infinity", p.x, p.y)));
        }
        let x = (h[0][0] * p.x + h[0][1] * p.y + h[0][2]) / w;
        let y = (h[1][0] * p.x + h[1][1] * p.y + h[1][2]) / w;
        Point2::finite(x, y).map_err(|e| GeometryError::Mapping(e.to_string()))
    }

    /// Like [`apply`](Self::apply) but also rejects points behind the camera (`w <= 0`).
    /// Used by warping, where the sign of the depth separates the two half-planes.
    pub(crate) fn apply_forward(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        let h = &self.h;
        let w = h[2][0] * x + h[2][1] * y + h[2][2];
        if w <= HORIZON_EPS {
            return None;
        }
        Some(((h[0][0] * x + h[0][1] * y + h[0][2]) / w, (h[1][0] * x + h[1][1] * y + h[1][2]) / w))
    }
}

impl TryFrom<[[f64; 3]; 3]> for Homography {
    type Error = GeometryError;

    fn try_from(rows: [[f64; 3]; 3]) -> Result<Self, Self::Error> {
        Homography::new(rows)
    }
}

impl From<Homography> for [[f64; 3]; 3] {
    fn from(h: Homography) -> Self {
        h.h
    }
}

/// Free-function form of [`Homography::apply`].
pub fn apply_homography(h: &Homography, p: Point2) -> Result<Point2, GeometryError> {
    h.apply(p)
}

fn to_matrix(rows: &[[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|r, c| rows[r][c])
}

fn from_matrix(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = m[(r, c)];
        }
    }
    out
}

/// Hartley conditioning: centroid to origin, mean distance sqrt(2).
fn conditioning(points: &[Point2]) -> Result<Matrix3<f64>, GeometryError> {
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = points.iter().map(|p| p.y).sum::<f64>() / n;
    let mean = points.iter().map(|p| (p.x - cx).hypot(p.y - cy)).sum::<f64>() / n;
    if mean <= f64::EPSILON {
        return Err(GeometryError::Estimation("all points coincide".into()));
    }
    let s = std::f64::consts::SQRT_2 / mean;
    Ok(Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0))
}

fn condition(t: &Matrix3<f64>, p: &Point2) -> (f64, f64) {
    let v = t * Vector3::new(p.x, p.y, 1.0);
    (v[0], v[1])
}

fn any_three_collinear(points: &[(f64, f64)]) -> bool {
    let n = points.len();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let (a, b, c) = (points[i], points[j], points[k]);
                let cross = (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
                if cross.abs() < 1e-9 {
                    return true;
                }
            }
        }
    }
    false
}

/// Normalized direct linear transform: least-squares null vector of the
/// stacked `2N x 9` correspondence system, found by SVD.
///
/// The result maps each `src[i]` onto `dst[i]` and is scaled so `h[2][2] == 1`.
pub fn estimate_homography(src: &[Point2], dst: &[Point2]) -> Result<Homography, GeometryError> {
    if src.len() != dst.len() {
        return Err(GeometryError::Estimation(format!(
            "correspondence count mismatch: {} vs {}",
            src.len(),
            dst.len()
        )));
    }
    if src.len() < 4 {
        return Err(GeometryError::Estimation(format!("need at least 4 correspondences, got {}", src.len())));
    }
    if src.iter().chain(dst).any(|p| !p.is_finite()) {
        return Err(GeometryError::Estimation("non-finite correspondence".into()));
    }

    let ts = conditioning(src)?;
    let td = conditioning(dst)?;
    let s: Vec<(f64, f64)> = src.iter().map(|p| condition(&ts, p)).collect();
    let d: Vec<(f64, f64)> = dst.iter().map(|p| condition(&td, p)).collect();

    if src.len() == 4 && (any_three_collinear(&s) || any_three_collinear(&d)) {
        return Err(GeometryError::Estimation("three of four points are collinear".into()));
    }

    // Zero rows pad the system to at least 9x9 so the SVD exposes the full right basis.
    let rows = (2 * s.len()).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (k, (&(x, y), &(u, v))) in s.iter().zip(&d).enumerate() {
        let r = 2 * k;
        a[(r, 0)] = -x;
        a[(r, 1)] = -y;
        a[(r, 2)] = -1.0;
        a[(r, 6)] = u * x;
        a[(r, 7)] = u * y;
        a[(r, 8)] = u;
        a[(r + 1, 3)] = -x;
        a[(r + 1, 4)] = -y;
        a[(r + 1, 5)] = -1.0;
        a[(r + 1, 6)] = v * x;
        a[(r + 1, 7)] = v * y;
        a[(r + 1, 8)] = v;
    }

    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| GeometryError::Estimation("SVD did not converge".into()))?;
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[i].total_cmp(&sv[j]));
    let (smallest, second) = (order[0], order[1]);
    if sv[second] <= 1e-10 * sv.max() {
        return Err(GeometryError::Estimation("degenerate configuration: solution is not unique".into()));
    }

    let row = v_t.row(smallest);
    let hn = Matrix3::from_fn(|r, c| row[3 * r + c]);
    let td_inv = td.try_inverse().ok_or_else(|| GeometryError::Estimation("conditioning not invertible".into()))?;
    let h = td_inv * hn * ts;
    if h[(2, 2)].abs() < 1e-15 {
        return Err(GeometryError::Estimation("estimated h[2][2] vanishes".into()));
    }
    Homography::new(from_matrix(&(h / h[(2, 2)]))).map_err(|e| GeometryError::Estimation(e.to_string()))
}
