use std::sync::Arc;

use image::RgbImage;

use super::anonymize::anonymize;
use super::config::PipelineConfig;
use super::fallback::{BrightMarkingSegmenter, DarkPixelSegmenter, FallbackDetector, NoPlates};
use super::markings::{parse_markings, MarkingResult};
use super::model::{DefectClass, Detector, MarkingSegmenter, PlateDetector, Segmenter};
use super::segment::segment_defect;
use crate::error::PipelineError;
use crate::geometry::{BoundingBox, Mask};
use crate::store::GeoPoint;

/// The four inference seams. Implementations are shared between workers, so
/// they must be `Send + Sync`; wrap single-use models in
/// [`Serialized`](super::Serialized).
#[derive(Clone)]
pub struct Models {
    pub plates: Arc<dyn PlateDetector + Send + Sync>,
    pub detector: Arc<dyn Detector + Send + Sync>,
    pub segmenter: Arc<dyn Segmenter + Send + Sync>,
    pub markings: Arc<dyn MarkingSegmenter + Send + Sync>,
}

impl Models {
    /// Classical stand-ins driven by the configuration thresholds.
    pub fn fallback(cfg: &PipelineConfig) -> Self {
        Self {
            plates: Arc::new(NoPlates),
            detector: Arc::new(FallbackDetector::from_config(cfg)),
            segmenter: Arc::new(DarkPixelSegmenter { intensity_threshold: cfg.fallback_intensity_threshold }),
            markings: Arc::new(BrightMarkingSegmenter { intensity_threshold: cfg.fallback_marking_intensity }),
        }
    }

    pub fn with_markings(&self, markings: Arc<dyn MarkingSegmenter + Send + Sync>) -> Self {
        Self { markings, ..self.clone() }
    }
}

impl std::fmt::Debug for Models {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Models").finish_non_exhaustive()
    }
}

/// Everything known about one detected defect before it is persisted.
#[derive(Debug, Clone, PartialEq)]
pub struct DefectPayload {
    pub class: DefectClass,
    pub bbox: BoundingBox,
    /// Full-image binary mask.
    pub mask: Mask,
    pub confidence: f64,
    pub geo: GeoPoint,
}

#[derive(Debug, Clone)]
pub struct ImageOutcome {
    pub anonymized: RgbImage,
    pub defects: Vec<DefectPayload>,
    pub markings: MarkingResult,
}

/// Anonymize, detect, segment each detection, then refine road markings.
/// Every later stage sees only the anonymized image.
pub fn process_image(
    image: &RgbImage,
    geo: GeoPoint,
    models: &Models,
    cfg: &PipelineConfig,
) -> Result<ImageOutcome, PipelineError> {
    cfg.validate()?;
    let (w, h) = image.dimensions();
    let plates = models.plates.detect_plates(image)?;
    let anonymized = anonymize(image, &plates, cfg.plate_fill);

    let detections = models.detector.detect(&anonymized)?;
    let mut defects = Vec::with_capacity(detections.len());
    for d in &detections {
        d.validate(w, h)?;
        let mask = segment_defect(&anonymized, d, models.segmenter.as_ref())?;
        defects.push(DefectPayload { class: d.class, bbox: d.bbox, mask, confidence: d.confidence, geo });
    }

    let prediction = models.markings.segment(&anonymized)?;
    let markings = parse_markings(&anonymized, &prediction, cfg)?;
    Ok(ImageOutcome { anonymized, defects, markings })
}

/// Maps `f` over `items` on a pool of `jobs` threads; results keep input order.
pub fn run_ordered<T, R, F>(items: Vec<T>, jobs: usize, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Send + Sync,
{
    use rayon::prelude::*;
    if jobs <= 1 {
        return items.into_iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(|| items.into_par_iter().map(&f).collect()),
        Err(e) => {
            log::warn!("worker pool unavailable ({e}); running sequentially");
            items.into_iter().map(f).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{Detection, KnownPlates};
    use image::Rgb;

    fn geo() -> GeoPoint {
        GeoPoint::new(-27.6, 153.1).unwrap()
    }

    #[test]
    fn blank_image_yields_nothing() {
        let cfg = PipelineConfig::default();
        let img = RgbImage::from_pixel(64, 48, Rgb([120, 120, 120]));
        let out = process_image(&img, geo(), &Models::fallback(&cfg), &cfg).unwrap();
        assert!(out.defects.is_empty());
        assert_eq!(out.markings.kept().count(), 0);
        assert_eq!(out.anonymized, img);
    }

    #[test]
    fn plates_are_hidden_before_detection() {
        let cfg = PipelineConfig::default();
        let mut img = RgbImage::from_pixel(64, 48, Rgb([120, 120, 120]));
        // A dark "plate" that would otherwise be detected as a defect.
        for y in 20..28 {
            for x in 10..40 {
                img.put_pixel(x, y, Rgb([5, 5, 5]));
            }
        }
        let models = Models::fallback(&cfg);
        assert_eq!(process_image(&img, geo(), &models, &cfg).unwrap().defects.len(), 1);
        let plate = BoundingBox::new(10.0, 20.0, 40.0, 28.0).unwrap();
        let models = Models { plates: Arc::new(KnownPlates(vec![plate])), ..models };
        let out = process_image(&img, geo(), &models, &cfg).unwrap();
        assert!(out.defects.is_empty());
        assert_eq!(*out.anonymized.get_pixel(12, 22), Rgb(cfg.plate_fill));
    }

    struct OutOfBounds;

    impl Detector for OutOfBounds {
        fn detect(&self, _image: &RgbImage) -> Result<Vec<Detection>, PipelineError> {
            Ok(vec![Detection::new(BoundingBox::new(0.0, 0.0, 500.0, 5.0).unwrap(), DefectClass::RoadBlock, 0.5)?])
        }
    }

    #[test]
    fn detector_contract_is_enforced() {
        let cfg = PipelineConfig::default();
        let models = Models { detector: Arc::new(OutOfBounds), ..Models::fallback(&cfg) };
        let img = RgbImage::new(64, 48);
        assert!(process_image(&img, geo(), &models, &cfg).is_err());
    }

    #[test]
    fn ordered_results_regardless_of_jobs() {
        let items: Vec<u64> = (0..50).collect();
        let seq = run_ordered(items.clone(), 1, |v| v * v);
        let par = run_ordered(items, 4, |v| v * v);
        assert_eq!(seq, par);
    }
}
