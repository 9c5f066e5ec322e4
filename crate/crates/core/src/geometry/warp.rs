//! Inverse-mapped raster warping.
//!
//! Every output pixel center `(u + 0.5, v + 0.5)` is pulled back through the
//! inverse transform and sampled from the source; samples that land outside
//! the source or behind the projective horizon become background.

use image::{GrayImage, Luma};

use super::homography::Homography;
use super::mask::Mask;
use crate::error::GeometryError;

/// Nearest-neighbour warp of a binary or label mask; the label set is preserved.
pub fn warp_mask(m: &Mask, h: &Homography, out_w: u32, out_h: u32) -> Result<Mask, GeometryError> {
    let inv = h.inverse()?;
    let mut out = Mask::zeros_with_classes(out_w, out_h, m.classes());
    for v in 0..out_h {
        for u in 0..out_w {
            let Some((x, y)) = inv.apply_forward(f64::from(u) + 0.5, f64::from(v) + 0.5) else {
                continue;
            };
            let (sx, sy) = (x.floor(), y.floor());
            if sx < 0.0 || sy < 0.0 || sx >= f64::from(m.width()) || sy >= f64::from(m.height()) {
                continue;
            }
            let value = m.get(sx as u32, sy as u32);
            if value != 0 {
                out.set(u, v, value);
            }
        }
    }
    Ok(out)
}

/// Bilinear warp of a grayscale photograph; out-of-source samples are 0.
pub fn warp_gray(img: &GrayImage, h: &Homography, out_w: u32, out_h: u32) -> Result<GrayImage, GeometryError> {
    let inv = h.inverse()?;
    let (w, hgt) = (i64::from(img.width()), i64::from(img.height()));
    let px = |x: i64, y: i64| -> f64 {
        if x < 0 || y < 0 || x >= w || y >= hgt {
            0.0
        } else {
            f64::from(img.get_pixel(x as u32, y as u32)[0])
        }
    };
    let mut out = GrayImage::new(out_w, out_h);
    for v in 0..out_h {
        for u in 0..out_w {
            let Some((x, y)) = inv.apply_forward(f64::from(u) + 0.5, f64::from(v) + 0.5) else {
                continue;
            };
            if x < 0.0 || y < 0.0 || x >= w as f64 || y >= hgt as f64 {
                continue;
            }
            // Sample space where integer coordinates are pixel centers.
            let (fx, fy) = (x - 0.5, y - 0.5);
            let (x0, y0) = (fx.floor(), fy.floor());
            let (ax, ay) = (fx - x0, fy - y0);
            let (x0, y0) = (x0 as i64, y0 as i64);
            // Clamp-to-edge inside the source so border pixels are not darkened.
            let s = |x: i64, y: i64| px(x.clamp(0, w - 1), y.clamp(0, hgt - 1));
            let top = s(x0, y0) * (1.0 - ax) + s(x0 + 1, y0) * ax;
            let bottom = s(x0, y0 + 1) * (1.0 - ax) + s(x0 + 1, y0 + 1) * ax;
            let value = top * (1.0 - ay) + bottom * ay;
            out.put_pixel(u, v, Luma([value.round().clamp(0.0, 255.0) as u8]));
        }
    }
    Ok(out)
}
