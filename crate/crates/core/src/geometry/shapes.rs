//! Image-space points, polygons and axis-aligned boxes.
//!
//! Coordinates are continuous pixel units: pixel `(i, j)` covers the square
//! `[i, i + 1) x [j, j + 1)` and its center sits at `(i + 0.5, j + 0.5)`.

use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Checked constructor, rejecting NaN and infinities.
    pub fn finite(x: f64, y: f64) -> Result<Self, GeometryError> {
        if x.is_finite() && y.is_finite() {
            Ok(Self { x, y })
        } else {
            Err(GeometryError::InvalidGeometry(format!("non-finite point ({x}, {y})")))
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl TryFrom<[f64; 2]> for Point2 {
    type Error = GeometryError;

    fn try_from([x, y]: [f64; 2]) -> Result<Self, Self::Error> {
        Point2::finite(x, y)
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

/// Signed shoelace area; positive for counter-clockwise order in a y-up frame.
pub fn signed_area(points: &[Point2]) -> f64 {
    if points.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for (i, a) in points.iter().enumerate() {
        let b = &points[(i + 1) % points.len()];
        acc += a.x * b.y - b.x * a.y;
    }
    acc * 0.5
}

/// A closed simple-or-not polygon with at least three vertices and non-zero area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point2>", into = "Vec<Point2>")]
pub struct Polygon {
    vertices: Vec<Point2>,
}

impl Polygon {
    pub fn new(vertices: Vec<Point2>) -> Result<Self, GeometryError> {
        if vertices.len() < 3 {
            return Err(GeometryError::InvalidGeometry(format!(
                "polygon needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if let Some(p) = vertices.iter().find(|p| !p.is_finite()) {
            return Err(GeometryError::InvalidGeometry(format!("non-finite vertex ({}, {})", p.x, p.y)));
        }
        if signed_area(&vertices) == 0.0 {
            return Err(GeometryError::InvalidGeometry("polygon has zero area".into()));
        }
        Ok(Self { vertices })
    }

    /// Convenience constructor from `(x, y)` tuples.
    pub fn from_xy(points: &[(f64, f64)]) -> Result<Self, GeometryError> {
        Self::new(points.iter().map(|&(x, y)| Point2::new(x, y)).collect())
    }

    /// Axis-aligned rectangle as a four-vertex polygon.
    pub fn rectangle(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self, GeometryError> {
        Self::from_xy(&[(x_min, y_min), (x_max, y_min), (x_max, y_max), (x_min, y_max)])
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices).abs()
    }

    pub fn bbox(&self) -> BoundingBox {
        polygon_to_bbox(self).expect("validated polygon always has a non-empty bbox")
    }
}

impl TryFrom<Vec<Point2>> for Polygon {
    type Error = GeometryError;

    fn try_from(v: Vec<Point2>) -> Result<Self, Self::Error> {
        Polygon::new(v)
    }
}

impl From<Polygon> for Vec<Point2> {
    fn from(p: Polygon) -> Self {
        p.vertices
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBox")]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

#[derive(Deserialize)]
struct RawBox {
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
}

impl TryFrom<RawBox> for BoundingBox {
    type Error = GeometryError;

    fn try_from(r: RawBox) -> Result<Self, Self::Error> {
        BoundingBox::new(r.x_min, r.y_min, r.x_max, r.y_max)
    }
}

impl BoundingBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self, GeometryError> {
        let finite = [x_min, y_min, x_max, y_max].iter().all(|v| v.is_finite());
        if !finite || x_min >= x_max || y_min >= y_max {
            return Err(GeometryError::InvalidGeometry(format!(
                "empty or non-finite box ({x_min}, {y_min}, {x_max}, {y_max})"
            )));
        }
        Ok(Self { x_min, y_min, x_max, y_max })
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, p: &Point2) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    /// Intersection with `[0, width] x [0, height]`, `None` when empty.
    pub fn clip(&self, width: u32, height: u32) -> Option<BoundingBox> {
        BoundingBox::new(
            self.x_min.max(0.0),
            self.y_min.max(0.0),
            self.x_max.min(f64::from(width)),
            self.y_max.min(f64::from(height)),
        )
        .ok()
    }

    pub fn iou(&self, other: &BoundingBox) -> f64 {
        let ix = (self.x_max.min(other.x_max) - self.x_min.max(other.x_min)).max(0.0);
        let iy = (self.y_max.min(other.y_max) - self.y_min.max(other.y_min)).max(0.0);
        let inter = ix * iy;
        let union = self.area() + other.area() - inter;
        if union > 0.0 {
            inter / union
        } else {
            0.0
        }
    }

    /// Integer pixel span `(x0, y0, x1, y1)` (exclusive ends) of pixels the box touches,
    /// clamped to the canvas.
    pub fn pixel_span(&self, width: u32, height: u32) -> (u32, u32, u32, u32) {
        let clamp = |v: f64, hi: u32| v.max(0.0).min(f64::from(hi)) as u32;
        (
            clamp(self.x_min.floor(), width),
            clamp(self.y_min.floor(), height),
            clamp(self.x_max.ceil(), width),
            clamp(self.y_max.ceil(), height),
        )
    }
}

/// Minimum axis-aligned rectangle covering every vertex of `p`.
pub fn polygon_to_bbox(p: &Polygon) -> Result<BoundingBox, GeometryError> {
    let vs = p.vertices();
    if vs.len() < 3 || signed_area(vs) == 0.0 {
        return Err(GeometryError::InvalidGeometry("degenerate polygon".into()));
    }
    let (mut x_min, mut y_min) = (f64::INFINITY, f64::INFINITY);
    let (mut x_max, mut y_max) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for v in vs {
        x_min = x_min.min(v.x);
        y_min = y_min.min(v.y);
        x_max = x_max.max(v.x);
        y_max = y_max.max(v.y);
    }
    BoundingBox::new(x_min, y_min, x_max, y_max)
}
