//! Deterministic classical stand-ins for the learned models, so the whole
//! pipeline runs without network weights.

use image::{imageops, GrayImage, RgbImage};

use super::config::PipelineConfig;
use super::model::{DefectClass, Detection, Detector, MarkingSegmenter, PlateDetector, Segmenter};
use crate::error::PipelineError;
use crate::geometry::{label_components, BoundingBox, Connectivity, Mask};

fn dark_mask(gray: &GrayImage, threshold: f64) -> Mask {
    Mask::from_fn(gray.width(), gray.height(), |x, y| f64::from(gray.get_pixel(x, y)[0]) < threshold)
}

/// Dark-pixel components as defects. Components smaller than `min_area` are
/// ignored; the class follows the bbox aspect ratio and the confidence is the
/// component's fill ratio of its box. Output is sorted by `x_min`, then `y_min`.
pub fn fallback_detect(image: &RgbImage, intensity_threshold: f64, min_area: usize) -> Vec<Detection> {
    let gray = imageops::grayscale(image);
    let dark = dark_mask(&gray, intensity_threshold);
    let labels = label_components(&dark, Connectivity::Eight, |v| v != 0);
    let mut out: Vec<Detection> = labels
        .components
        .iter()
        .filter(|c| c.area >= min_area.max(1))
        .map(|c| {
            let bbox = BoundingBox::new(
                f64::from(c.min_x),
                f64::from(c.min_y),
                f64::from(c.max_x + 1),
                f64::from(c.max_y + 1),
            )
            .expect("component box has positive extent");
            let (w, h) = (bbox.width(), bbox.height());
            let class = if w / h >= 3.0 {
                DefectClass::RoadTransverse
            } else if h / w >= 3.0 {
                DefectClass::RoadLongitudinal
            } else {
                DefectClass::RoadBlock
            };
            Detection { bbox, class, confidence: c.area as f64 / bbox.area() }
        })
        .collect();
    out.sort_by(|a, b| {
        (a.bbox.x_min, a.bbox.y_min).partial_cmp(&(b.bbox.x_min, b.bbox.y_min)).expect("finite box coordinates")
    });
    out
}

#[derive(Debug, Clone)]
pub struct FallbackDetector {
    pub intensity_threshold: f64,
    pub min_component_area: usize,
}

impl FallbackDetector {
    pub fn from_config(cfg: &PipelineConfig) -> Self {
        Self { intensity_threshold: cfg.fallback_intensity_threshold, min_component_area: cfg.min_component_area }
    }
}

impl Detector for FallbackDetector {
    fn detect(&self, image: &RgbImage) -> Result<Vec<Detection>, PipelineError> {
        Ok(fallback_detect(image, self.intensity_threshold, self.min_component_area))
    }
}

/// Marks crop pixels darker than the threshold.
#[derive(Debug, Clone)]
pub struct DarkPixelSegmenter {
    pub intensity_threshold: f64,
}

impl Segmenter for DarkPixelSegmenter {
    fn segment(&self, crop: &RgbImage) -> Result<Mask, PipelineError> {
        Ok(dark_mask(&imageops::grayscale(crop), self.intensity_threshold))
    }
}

/// Predicts marking label 1 wherever the gray level reaches the threshold.
#[derive(Debug, Clone)]
pub struct BrightMarkingSegmenter {
    pub intensity_threshold: u8,
}

impl MarkingSegmenter for BrightMarkingSegmenter {
    fn segment(&self, image: &RgbImage) -> Result<Mask, PipelineError> {
        let gray = imageops::grayscale(image);
        Ok(Mask::from_fn(gray.width(), gray.height(), |x, y| gray.get_pixel(x, y)[0] >= self.intensity_threshold))
    }
}

/// Replays a prediction computed elsewhere (for instance by an external
/// segmentation network and saved next to the image).
#[derive(Debug, Clone)]
pub struct PrecomputedMarkings(pub Mask);

impl PrecomputedMarkings {
    /// Reads a grayscale PNG whose pixel values are marking labels (0 = background).
    /// A mask holding only 0 and 255 is read as binary.
    pub fn from_png_bytes(bytes: &[u8]) -> Result<Self, PipelineError> {
        let gray = image::load_from_memory(bytes)
            .map_err(|e| PipelineError::Decode(format!("prediction mask: {e}")))?
            .to_luma8();
        let (w, h) = gray.dimensions();
        let mut raw = gray.into_raw();
        if raw.iter().all(|&v| v == 0 || v == 255) {
            raw.iter_mut().for_each(|v| *v = u8::from(*v != 0));
        }
        let max = raw.iter().copied().max().unwrap_or(0);
        if max == 255 {
            return Err(PipelineError::Decode("prediction mask: label 255 is reserved for binary masks".into()));
        }
        let mask = Mask::labels(w, h, (max + 1).max(2), raw)?;
        Ok(Self(mask))
    }
}

impl MarkingSegmenter for PrecomputedMarkings {
    fn segment(&self, image: &RgbImage) -> Result<Mask, PipelineError> {
        if self.0.dims() != image.dimensions() {
            return Err(PipelineError::Stage {
                stage: "marking-segment",
                detail: format!("precomputed mask {:?} does not match image {:?}", self.0.dims(), image.dimensions()),
            });
        }
        Ok(self.0.clone())
    }
}

/// Plate detector that finds nothing; plates must then be supplied externally.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoPlates;

impl PlateDetector for NoPlates {
    fn detect_plates(&self, _image: &RgbImage) -> Result<Vec<BoundingBox>, PipelineError> {
        Ok(Vec::new())
    }
}

/// Plate boxes known ahead of time, for example from an external anonymizer.
#[derive(Debug, Clone, Default)]
pub struct KnownPlates(pub Vec<BoundingBox>);

impl PlateDetector for KnownPlates {
    fn detect_plates(&self, _image: &RgbImage) -> Result<Vec<BoundingBox>, PipelineError> {
        Ok(self.0.clone())
    }
}
