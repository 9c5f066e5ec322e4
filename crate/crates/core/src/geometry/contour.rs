//! Border following on binary masks.
//!
//! Contours run along pixel edges (crack following), so each vertex is an
//! integer pixel corner and consecutive vertices are one unit apart. The
//! polygon traced around a component therefore encloses exactly that
//! component's pixel centers. Foreground is 8-connected and background
//! 4-connected: at a corner where two foreground pixels touch only
//! diagonally, an outer border keeps them together while a hole border
//! keeps the two background pixels apart.

use serde::{Deserialize, Serialize};

use super::components::{label_components, Connectivity};
use super::mask::Mask;
use super::shapes::{signed_area, Point2, Polygon};
use crate::error::GeometryError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ContourKind {
    #[default]
    Outer,
    Hole,
}

/// Closed polyline; the last point connects back to the first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    points: Vec<Point2>,
    #[serde(default)]
    kind: ContourKind,
}

impl Contour {
    pub fn new(points: Vec<Point2>) -> Result<Self, GeometryError> {
        Self::with_kind(points, ContourKind::Outer)
    }

    pub fn with_kind(points: Vec<Point2>, kind: ContourKind) -> Result<Self, GeometryError> {
        if points.len() < 3 {
            return Err(GeometryError::InvalidGeometry(format!(
                "contour needs at least 3 points, got {}",
                points.len()
            )));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(GeometryError::InvalidGeometry("non-finite contour point".into()));
        }
        Ok(Self { points, kind })
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn kind(&self) -> ContourKind {
        self.kind
    }

    pub fn is_hole(&self) -> bool {
        self.kind == ContourKind::Hole
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.points).abs()
    }

    pub fn to_polygon(&self) -> Result<Polygon, GeometryError> {
        Polygon::new(self.points.clone())
    }

    /// Maps every point through `f`, keeping the contour kind.
    pub fn try_map(
        &self,
        mut f: impl FnMut(Point2) -> Result<Point2, GeometryError>,
    ) -> Result<Contour, GeometryError> {
        let points = self.points.iter().map(|&p| f(p)).collect::<Result<Vec<_>, _>>()?;
        Contour::with_kind(points, self.kind)
    }
}

/// Traces one closed border starting on the top edge of `seed`, which must be the
/// first pixel of its region in raster order. The region lies to the right of the
/// walking direction (y axis pointing down).
fn follow_border(inside: impl Fn(i64, i64) -> bool, seed: (u32, u32), join_diagonals: bool) -> Vec<Point2> {
    let start = (i64::from(seed.0), i64::from(seed.1));
    let east = (1i64, 0i64);
    // Pixel in quadrant (a, b) around corner v, with a, b in {-1, +1}.
    let quad = |v: (i64, i64), a: i64, b: i64| (v.0 + if a > 0 { 0 } else { -1 }, v.1 + if b > 0 { 0 } else { -1 });
    let mut points = Vec::new();
    let (mut v, mut d) = (start, east);
    loop {
        points.push(Point2::new(v.0 as f64, v.1 as f64));
        v = (v.0 + d.0, v.1 + d.1);
        let r = (-d.1, d.0);
        let left = (d.1, -d.0);
        let fr = quad(v, d.0 + r.0, d.1 + r.1);
        let fl = quad(v, d.0 - r.0, d.1 - r.1);
        let (in_fl, in_fr) = (inside(fl.0, fl.1), inside(fr.0, fr.1));
        d = match (in_fl, in_fr) {
            (true, true) => left,
            (false, true) => d,
            (false, false) => r,
            (true, false) => {
                if join_diagonals {
                    left
                } else {
                    r
                }
            }
        };
        if v == start && d == east {
            break;
        }
    }
    points
}

/// One outer contour per 8-connected foreground component plus one contour per
/// enclosed 4-connected background hole, sorted by descending enclosed area
/// (ties keep raster discovery order, outer borders first). Any non-zero pixel
/// counts as foreground.
pub fn trace_contours(m: &Mask) -> Vec<Contour> {
    let fg = label_components(m, Connectivity::Eight, |v| v != 0);
    let mut out = Vec::with_capacity(fg.components.len());
    for c in &fg.components {
        let pts = follow_border(|x, y| fg.label_at(x, y) == c.label, c.seed, true);
        out.push(Contour { points: pts, kind: ContourKind::Outer });
    }
    if !fg.components.is_empty() {
        let bg = label_components(m, Connectivity::Four, |v| v == 0);
        for c in bg.components.iter().filter(|c| !c.touches_border) {
            let pts = follow_border(|x, y| bg.label_at(x, y) == c.label, c.seed, false);
            out.push(Contour { points: pts, kind: ContourKind::Hole });
        }
    }
    let mut keyed: Vec<(f64, Contour)> = out.into_iter().map(|c| (c.area(), c)).collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0));
    keyed.into_iter().map(|(_, c)| c).collect()
}
