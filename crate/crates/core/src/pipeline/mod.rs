//! Image processing: anonymization, defect detection and segmentation, and
//! road-marking refinement, behind pluggable inference interfaces.

mod annotation;
mod anonymize;
mod config;
mod fallback;
mod markings;
mod model;
mod process;
mod segment;

pub use annotation::{annotation_to_detections, AnnotatedPolygon, AnnotationDocument};
pub use anonymize::anonymize;
pub use config::{
    PipelineConfig, DEFAULT_INTENSITY_THRESHOLD, DEFAULT_MARKING_INTENSITY, DEFAULT_MIN_COMPONENT_AREA,
    DEFAULT_OVERLAP_THRESHOLD,
};
pub use fallback::{
    fallback_detect, BrightMarkingSegmenter, DarkPixelSegmenter, FallbackDetector, KnownPlates, NoPlates,
    PrecomputedMarkings,
};
pub use markings::{contour_coverage, otsu_threshold, parse_markings, MarkingCandidate, MarkingResult};
pub use model::{DefectClass, Detection, Detector, MarkingSegmenter, PlateDetector, Segmenter, Serialized};
pub use process::{process_image, run_ordered, DefectPayload, ImageOutcome, Models};
pub use segment::segment_defect;
