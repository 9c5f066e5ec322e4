use image::{Rgb, RgbImage};

use crate::geometry::BoundingBox;

/// Blanks every pixel whose extent overlaps a (clipped) plate box with `fill`.
/// Pixels outside all boxes are left untouched.
pub fn anonymize(image: &RgbImage, plate_boxes: &[BoundingBox], fill: [u8; 3]) -> RgbImage {
    let mut out = image.clone();
    let (w, h) = image.dimensions();
    for b in plate_boxes {
        let Some(clipped) = b.clip(w, h) else { continue };
        let (x0, y0, x1, y1) = clipped.pixel_span(w, h);
        for y in y0..y1 {
            for x in x0..x1 {
                out.put_pixel(x, y, Rgb(fill));
            }
        }
    }
    out
}
