//! Defect taxonomy, detections and the pluggable inference seams.

use std::fmt;
use std::str::FromStr;
use std::sync::Mutex;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::PipelineError;
use crate::geometry::{BoundingBox, Mask};

/// Road defect classes. `Background` is label 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DefectClass {
    #[serde(rename = "background")]
    Background,
    #[serde(rename = "Kerb_Cracking")]
    KerbCracking,
    #[serde(rename = "Road_Crocodile")]
    RoadCrocodile,
    #[serde(rename = "Road_Longitudinal")]
    RoadLongitudinal,
    #[serde(rename = "Road_Transverse")]
    RoadTransverse,
    #[serde(rename = "Road_Block")]
    RoadBlock,
    #[serde(rename = "Sealed_Crack")]
    SealedCrack,
}

impl DefectClass {
    pub const ALL: [DefectClass; 7] = [
        Self::Background,
        Self::KerbCracking,
        Self::RoadCrocodile,
        Self::RoadLongitudinal,
        Self::RoadTransverse,
        Self::RoadBlock,
        Self::SealedCrack,
    ];

    pub fn label(self) -> u8 {
        self as u8
    }

    pub fn from_label(label: u8) -> Option<Self> {
        Self::ALL.get(usize::from(label)).copied()
    }

    /// Annotation-tool spelling.
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Background => "background",
            Self::KerbCracking => "Kerb_Cracking",
            Self::RoadCrocodile => "Road_Crocodile",
            Self::RoadLongitudinal => "Road_Longitudinal",
            Self::RoadTransverse => "Road_Transverse",
            Self::RoadBlock => "Road_Block",
            Self::SealedCrack => "Sealed_Crack",
        }
    }
}

impl fmt::Display for DefectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DefectClass {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| PipelineError::Annotation(format!("unknown defect class `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BoundingBox,
    pub class: DefectClass,
    pub confidence: f64,
}

impl Detection {
    pub fn new(bbox: BoundingBox, class: DefectClass, confidence: f64) -> Result<Self, PipelineError> {
        let d = Self { bbox, class, confidence };
        d.check_shape()?;
        Ok(d)
    }

    fn check_shape(&self) -> Result<(), PipelineError> {
        if self.class == DefectClass::Background {
            return Err(stage_err("detect", "detection class must not be background"));
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(stage_err("detect", format!("confidence {} outside [0,1]", self.confidence)));
        }
        Ok(())
    }

    /// Checks the detection against an image of the given size.
    pub fn validate(&self, width: u32, height: u32) -> Result<(), PipelineError> {
        self.check_shape()?;
        let b = &self.bbox;
        if b.x_min < 0.0 || b.y_min < 0.0 || b.x_max > f64::from(width) || b.y_max > f64::from(height) {
            return Err(stage_err(
                "detect",
                format!("bbox ({}, {}, {}, {}) outside {width}x{height} image", b.x_min, b.y_min, b.x_max, b.y_max),
            ));
        }
        Ok(())
    }
}

pub(crate) fn stage_err(stage: &'static str, detail: impl Into<String>) -> PipelineError {
    PipelineError::Stage { stage, detail: detail.into() }
}

/// Produces defect bounding boxes for a full street image.
pub trait Detector {
    fn detect(&self, image: &RgbImage) -> Result<Vec<Detection>, PipelineError>;
}

/// Produces a binary mask with the crop's dimensions.
pub trait Segmenter {
    fn segment(&self, crop: &RgbImage) -> Result<Mask, PipelineError>;
}

/// Produces a road-marking label mask with the image's dimensions.
pub trait MarkingSegmenter {
    fn segment(&self, image: &RgbImage) -> Result<Mask, PipelineError>;
}

/// Finds licence plates to blank out before anything is stored.
pub trait PlateDetector {
    fn detect_plates(&self, image: &RgbImage) -> Result<Vec<BoundingBox>, PipelineError>;
}

/// Adapter for models that cannot be invoked concurrently: calls are
/// serialized through a mutex so the wrapper can be shared across workers.
#[derive(Debug)]
pub struct Serialized<M>(Mutex<M>);

impl<M> Serialized<M> {
    pub fn new(model: M) -> Self {
        Self(Mutex::new(model))
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, M> {
        self.0.lock().unwrap_or_else(|e| e.into_inner())
    }
}

impl<M: Detector> Detector for Serialized<M> {
    fn detect(&self, image: &RgbImage) -> Result<Vec<Detection>, PipelineError> {
        self.lock().detect(image)
    }
}

impl<M: Segmenter> Segmenter for Serialized<M> {
    fn segment(&self, crop: &RgbImage) -> Result<Mask, PipelineError> {
        self.lock().segment(crop)
    }
}

impl<M: MarkingSegmenter> MarkingSegmenter for Serialized<M> {
    fn segment(&self, image: &RgbImage) -> Result<Mask, PipelineError> {
        self.lock().segment(image)
    }
}

impl<M: PlateDetector> PlateDetector for Serialized<M> {
    fn detect_plates(&self, image: &RgbImage) -> Result<Vec<BoundingBox>, PipelineError> {
        self.lock().detect_plates(image)
    }
}
