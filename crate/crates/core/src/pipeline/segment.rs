use image::{imageops, RgbImage};

use super::model::{stage_err, Detection, Segmenter};
use crate::error::PipelineError;
use crate::geometry::Mask;

/// Crops the detection box, segments the crop and pastes the result into an
/// image-sized binary mask. Nothing outside the box is ever set.
pub fn segment_defect(image: &RgbImage, d: &Detection, segmenter: &dyn Segmenter) -> Result<Mask, PipelineError> {
    let (w, h) = image.dimensions();
    d.validate(w, h)?;
    let (x0, y0, x1, y1) = d.bbox.pixel_span(w, h);
    let crop = imageops::crop_imm(image, x0, y0, x1 - x0, y1 - y0).to_image();
    let local = segmenter.segment(&crop)?;
    if local.dims() != crop.dimensions() {
        return Err(stage_err(
            "segment",
            format!("segmenter returned {:?} for a {:?} crop", local.dims(), crop.dimensions()),
        ));
    }
    let mut full = Mask::zeros(w, h);
    for y in 0..local.height() {
        for x in 0..local.width() {
            if local.get(x, y) != 0 {
                full.set(x0 + x, y0 + y, 1);
            }
        }
    }
    Ok(full)
}
