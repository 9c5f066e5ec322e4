//! Polygon annotation documents and their conversion to detector training boxes.
//!
//! ```json
//! { "image": "frame_0001.jpg",
//!   "polygons": [ { "class": "Road_Transverse", "points": [[12, 40], [80, 44], [78, 52]] } ] }
//! ```

use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use super::model::DefectClass;
use crate::error::PipelineError;
use crate::geometry::{polygon_to_bbox, BoundingBox, Point2, Polygon};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationDocument {
    pub image: String,
    pub polygons: Vec<AnnotatedPolygon>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedPolygon {
    pub class: String,
    pub points: Vec<[f64; 2]>,
}

impl AnnotationDocument {
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        serde_json::from_str(text).map_err(|e| PipelineError::Annotation(e.to_string()))
    }

    /// Resolves class strings (through `cfg.class_map` for non-taxonomy spellings)
    /// and validates every polygon.
    pub fn labelled_polygons(&self, cfg: &PipelineConfig) -> Result<Vec<(Polygon, DefectClass)>, PipelineError> {
        self.polygons
            .iter()
            .map(|a| {
                let class = cfg.resolve_class(&a.class)?;
                let poly = Polygon::new(a.points.iter().map(|&[x, y]| Point2::new(x, y)).collect())?;
                Ok((poly, class))
            })
            .collect()
    }
}

/// Minimum covering box for each labelled polygon, order preserved.
pub fn annotation_to_detections(
    polygons: &[(Polygon, DefectClass)],
) -> Result<Vec<(BoundingBox, DefectClass)>, PipelineError> {
    polygons
        .iter()
        .map(|(p, class)| {
            if *class == DefectClass::Background {
                return Err(PipelineError::Annotation("background is not an annotatable defect".into()));
            }
            Ok((polygon_to_bbox(p)?, *class))
        })
        .collect()
}
