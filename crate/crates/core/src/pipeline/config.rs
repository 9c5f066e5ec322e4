//! Pipeline configuration and its TOML file form.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use super::model::DefectClass;
use crate::error::PipelineError;
use crate::geometry::{estimate_homography, Homography, Point2, Polygon};
use crate::store::GeoPoint;

pub const DEFAULT_OVERLAP_THRESHOLD: f64 = 0.6;
pub const DEFAULT_INTENSITY_THRESHOLD: f64 = 60.0;
pub const DEFAULT_MIN_COMPONENT_AREA: usize = 30;
pub const DEFAULT_MARKING_INTENSITY: u8 = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Minimum fraction of a traced contour's region the marking prediction must cover.
    pub overlap_threshold: f64,
    /// Street-view road region; `None` uses the whole frame.
    pub roi: Option<Polygon>,
    /// Street view to bird's-eye view.
    pub bev_homography: Homography,
    /// Bird's-eye canvas size; `None` reuses the input image size.
    pub bev_size: Option<(u32, u32)>,
    /// Pixels darker than this are crack candidates for the fallback detector and segmenter.
    pub fallback_intensity_threshold: f64,
    pub min_component_area: usize,
    /// Gray level at or above which the fallback marking segmenter predicts a marking.
    pub fallback_marking_intensity: u8,
    /// Fill colour for anonymized plate regions.
    pub plate_fill: [u8; 3],
    /// Extra annotation class spellings mapped onto the taxonomy.
    pub class_map: BTreeMap<String, DefectClass>,
    /// Location for images arriving without a geo sidecar.
    pub default_geo: Option<GeoPoint>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            overlap_threshold: DEFAULT_OVERLAP_THRESHOLD,
            roi: None,
            bev_homography: Homography::IDENTITY,
            bev_size: None,
            fallback_intensity_threshold: DEFAULT_INTENSITY_THRESHOLD,
            min_component_area: DEFAULT_MIN_COMPONENT_AREA,
            fallback_marking_intensity: DEFAULT_MARKING_INTENSITY,
            plate_fill: [128, 128, 128],
            class_map: BTreeMap::new(),
            default_geo: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(self.overlap_threshold > 0.0 && self.overlap_threshold <= 1.0) {
            return Err(PipelineError::Config(format!(
                "overlap_threshold {} must lie in (0, 1]",
                self.overlap_threshold
            )));
        }
        self.bev_homography.inverse().map_err(|e| PipelineError::Config(format!("bev homography: {e}")))?;
        if matches!(self.bev_size, Some((0, _)) | Some((_, 0))) {
            return Err(PipelineError::Config("bev size must be positive".into()));
        }
        if !self.fallback_intensity_threshold.is_finite() {
            return Err(PipelineError::Config("fallback_intensity_threshold must be finite".into()));
        }
        Ok(())
    }

    /// Resolves an annotation class string: exact taxonomy spelling first, then `class_map`.
    pub fn resolve_class(&self, name: &str) -> Result<DefectClass, PipelineError> {
        name.parse::<DefectClass>().or_else(|e| self.class_map.get(name).copied().ok_or(e))
    }

    pub fn from_toml_str(text: &str) -> Result<Self, PipelineError> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        file.into_config()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    overlap_threshold: Option<f64>,
    roi: Option<Vec<[f64; 2]>>,
    fallback_intensity_threshold: Option<f64>,
    min_component_area: Option<usize>,
    fallback_marking_intensity: Option<u8>,
    plate_fill: Option<[u8; 3]>,
    bev: Option<BevSection>,
    #[serde(default)]
    class_map: BTreeMap<String, String>,
    default_geo: Option<GeoSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BevSection {
    width: Option<u32>,
    height: Option<u32>,
    homography: Option<[[f64; 3]; 3]>,
    /// Street-view ground points and their bird's-eye targets, used when
    /// `homography` is absent.
    src: Option<Vec<[f64; 2]>>,
    dst: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeoSection {
    lat: f64,
    lon: f64,
}

fn points(raw: &[[f64; 2]]) -> Vec<Point2> {
    raw.iter().map(|&[x, y]| Point2::new(x, y)).collect()
}

impl ConfigFile {
    fn into_config(self) -> Result<PipelineConfig, PipelineError> {
        let defaults = PipelineConfig::default();
        let cfg_err = |what: &str, e: &dyn std::fmt::Display| PipelineError::Config(format!("{what}: {e}"));

        let roi = self.roi.map(|r| Polygon::new(points(&r)).map_err(|e| cfg_err("roi", &e))).transpose()?;

        let (bev_homography, bev_size) = match self.bev {
            None => (Homography::IDENTITY, None),
            Some(b) => {
                let h = match (b.homography, b.src, b.dst) {
                    (Some(h), None, None) => Homography::new(h).map_err(|e| cfg_err("bev.homography", &e))?,
                    (None, Some(src), Some(dst)) => estimate_homography(&points(&src), &points(&dst))
                        .map_err(|e| cfg_err("bev correspondences", &e))?,
                    (None, None, None) => Homography::IDENTITY,
                    _ => {
                        return Err(PipelineError::Config(
                            "bev: give either `homography` or both `src` and `dst`".into(),
                        ))
                    }
                };
                let size = match (b.width, b.height) {
                    (Some(w), Some(h)) => Some((w, h)),
                    (None, None) => None,
                    _ => return Err(PipelineError::Config("bev: width and height go together".into())),
                };
                (h, size)
            }
        };

        let mut class_map = BTreeMap::new();
        for (alias, target) in self.class_map {
            let class: DefectClass = target.parse().map_err(|e| cfg_err("class_map", &e))?;
            class_map.insert(alias, class);
        }

        let default_geo = self
            .default_geo
            .map(|g| GeoPoint::new(g.lat, g.lon).map_err(|e| cfg_err("default_geo", &e)))
            .transpose()?;

        let cfg = PipelineConfig {
            overlap_threshold: self.overlap_threshold.unwrap_or(defaults.overlap_threshold),
            roi,
            bev_homography,
            bev_size,
            fallback_intensity_threshold: self
                .fallback_intensity_threshold
                .unwrap_or(defaults.fallback_intensity_threshold),
            min_component_area: self.min_component_area.unwrap_or(defaults.min_component_area),
            fallback_marking_intensity: self.fallback_marking_intensity.unwrap_or(defaults.fallback_marking_intensity),
            plate_fill: self.plate_fill.unwrap_or(defaults.plate_fill),
            class_map,
            default_geo,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
