//! Scanline polygon fill and mask overlap scoring.

use super::mask::Mask;
use super::shapes::{Point2, Polygon};
use crate::error::GeometryError;

/// Even-odd scanline fill sampled at pixel centers. A center exactly on a
/// left or top edge is inside, on a right or bottom edge outside, so two
/// polygons sharing an edge never both claim a pixel.
pub fn rasterize_polygon(p: &Polygon, width: u32, height: u32) -> Result<Mask, GeometryError> {
    if width == 0 || height == 0 {
        return Err(GeometryError::Argument("canvas dimensions must be positive".into()));
    }
    let mut mask = Mask::zeros(width, height);
    fill_points(p.vertices(), &mut mask);
    Ok(mask)
}

fn fill_points(vertices: &[Point2], mask: &mut Mask) {
    let (w, h) = mask.dims();
    let n = vertices.len();
    let y_lo = vertices.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
    let y_hi = vertices.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
    let row_start = (y_lo - 0.5).ceil().max(0.0);
    let row_end = (y_hi - 0.5).ceil().min(f64::from(h));
    if row_start >= row_end {
        return;
    }
    let mut xs: Vec<f64> = Vec::with_capacity(8);
    for row in row_start as u32..row_end as u32 {
        let yc = f64::from(row) + 0.5;
        xs.clear();
        for i in 0..n {
            let (a, b) = (vertices[i], vertices[(i + 1) % n]);
            if a.y == b.y {
                continue;
            }
            let (lo, hi) = if a.y < b.y { (a, b) } else { (b, a) };
            if yc >= lo.y && yc < hi.y {
                xs.push(lo.x + (yc - lo.y) * (hi.x - lo.x) / (hi.y - lo.y));
            }
        }
        xs.sort_by(f64::total_cmp);
        for pair in xs.chunks_exact(2) {
            let first = (pair[0] - 0.5).ceil().max(0.0);
            let end = (pair[1] - 0.5).ceil().min(f64::from(w));
            if first >= end {
                continue;
            }
            for col in first as u32..end as u32 {
                mask.set(col, row, 1);
            }
        }
    }
}

/// Fraction of `region`'s foreground that `prediction` also covers.
pub fn overlap_ratio(region: &Mask, prediction: &Mask) -> Result<f64, GeometryError> {
    if region.dims() != prediction.dims() {
        return Err(GeometryError::Argument(format!(
            "dimension mismatch: region {:?} vs prediction {:?}",
            region.dims(),
            prediction.dims()
        )));
    }
    let (mut total, mut covered) = (0usize, 0usize);
    for (&r, &p) in region.data().iter().zip(prediction.data()) {
        if r != 0 {
            total += 1;
            covered += usize::from(p != 0);
        }
    }
    if total == 0 {
        return Err(GeometryError::Argument("region has no foreground pixels".into()));
    }
    Ok(covered as f64 / total as f64)
}
