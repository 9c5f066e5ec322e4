//! Turning raw image files into stored records. Shared by the batch CLI and
//! the upload worker.
//!
//! Inputs are an image (`.png`, `.jpg`, `.jpeg`) with two optional sidecars
//! next to it: `<stem>.geo.json` holding `{"lat": .., "lon": .., "captured_at": ..}`
//! (timestamp optional) and `<stem>.pred.png` holding a marking prediction.

use std::io::Cursor;
use std::path::Path;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{IngestError, PipelineError};
use crate::pipeline::{process_image, ImageOutcome, Models, PipelineConfig, PrecomputedMarkings};
use crate::store::{timestamp, GeoPoint, NewDefect, NewImage, NewMarking, RecordId, Store};

pub const GEO_SUFFIX: &str = ".geo.json";
pub const PRED_SUFFIX: &str = ".pred.png";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeoSidecar {
    pub lat: f64,
    pub lon: f64,
    #[serde(default, with = "timestamp::option", skip_serializing_if = "Option::is_none")]
    pub captured_at: Option<DateTime<Utc>>,
}

impl GeoSidecar {
    pub fn parse(name: &str, bytes: &[u8]) -> Result<Self, IngestError> {
        let side: GeoSidecar = serde_json::from_slice(bytes)
            .map_err(|e| IngestError::Sidecar { name: name.to_string(), detail: e.to_string() })?;
        side.geo().map_err(|e| IngestError::Sidecar { name: name.to_string(), detail: e.to_string() })?;
        Ok(side)
    }

    pub fn geo(&self) -> Result<GeoPoint, crate::error::StoreError> {
        GeoPoint::new(self.lat, self.lon)
    }
}

/// One image waiting to be processed.
#[derive(Debug, Clone)]
pub struct IngestItem {
    /// Original file name, kept on the image record.
    pub source_name: String,
    pub bytes: Vec<u8>,
    pub sidecar: Option<GeoSidecar>,
    pub prediction: Option<Vec<u8>>,
}

/// Pipeline output for one image, ready to persist.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub source_name: String,
    pub geo: GeoPoint,
    pub captured_at: Option<DateTime<Utc>>,
    pub outcome: ImageOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub image_id: RecordId,
    pub defect_ids: Vec<RecordId>,
    pub marking_ids: Vec<RecordId>,
}

/// Runs the pipeline on one item. Pure CPU work; touches no storage.
pub fn prepare(item: &IngestItem, models: &Models, cfg: &PipelineConfig) -> Result<Prepared, IngestError> {
    let image = image::load_from_memory(&item.bytes)
        .map_err(|e| PipelineError::Decode(format!("{}: {e}", item.source_name)))?
        .to_rgb8();
    let geo = match &item.sidecar {
        Some(s) => s.geo()?,
        None => cfg.default_geo.ok_or_else(|| IngestError::MissingGeo(item.source_name.clone()))?,
    };
    let outcome = match &item.prediction {
        Some(bytes) => {
            let pred = PrecomputedMarkings::from_png_bytes(bytes)?;
            process_image(&image, geo, &models.with_markings(Arc::new(pred)), cfg)?
        }
        None => process_image(&image, geo, models, cfg)?,
    };
    Ok(Prepared {
        source_name: item.source_name.clone(),
        geo,
        captured_at: item.sidecar.as_ref().and_then(|s| s.captured_at),
        outcome,
    })
}

fn png_bytes(img: &image::DynamicImage) -> Result<Vec<u8>, IngestError> {
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png)
        .map_err(|e| PipelineError::Stage { stage: "encode", detail: e.to_string() })?;
    Ok(out.into_inner())
}

/// Stores the anonymized image, the defect masks and records, and the kept markings.
/// Only the anonymized image is ever written under `images/`.
pub fn persist(store: &Store, prepared: Prepared, cfg: &PipelineConfig) -> Result<Ingested, IngestError> {
    let image_id = RecordId::generate();
    let Prepared { source_name, geo, captured_at, outcome } = prepared;
    let path = store.write_file(
        &format!("images/{image_id}.png"),
        &png_bytes(&image::DynamicImage::ImageRgb8(outcome.anonymized))?,
    )?;
    store.insert_image(NewImage {
        id: Some(image_id),
        path,
        captured_at: captured_at.unwrap_or_else(|| store.now()),
        geo,
        anonymized: true,
        source_name,
    })?;

    let mut defect_ids = Vec::with_capacity(outcome.defects.len());
    for d in outcome.defects {
        let id = RecordId::generate();
        let mask_path = store.write_file(
            &format!("masks/{id}.png"),
            &png_bytes(&image::DynamicImage::ImageLuma8(d.mask.to_gray_image()))?,
        )?;
        defect_ids.push(store.insert_defect(NewDefect {
            id: Some(id),
            image_id,
            class: d.class,
            bbox: d.bbox,
            mask_path,
            confidence: d.confidence,
            geo: d.geo,
        })?);
    }

    let mut marking_ids = Vec::new();
    for c in outcome.markings.candidates.into_iter().filter(|c| c.kept) {
        let Some(contour) = c.image_contour else { continue };
        marking_ids.push(store.insert_marking(NewMarking {
            id: None,
            image_id,
            contour,
            coverage: c.coverage,
            threshold: cfg.overlap_threshold,
        })?);
    }
    Ok(Ingested { image_id, defect_ids, marking_ids })
}

pub fn ingest(
    store: &Store,
    item: &IngestItem,
    models: &Models,
    cfg: &PipelineConfig,
) -> Result<Ingested, IngestError> {
    persist(store, prepare(item, models, cfg)?, cfg)
}

pub fn is_image_name(name: &str) -> bool {
    let lower = name.to_ascii_lowercase();
    !lower.ends_with(PRED_SUFFIX) && [".png", ".jpg", ".jpeg"].iter().any(|ext| lower.ends_with(ext))
}

/// File stem used to pair an image with its sidecars.
pub fn stem(name: &str) -> &str {
    name.rsplit_once('.').map_or(name, |(s, _)| s)
}

/// An input file that could not even be read, reported as a per-image failure.
#[derive(Debug)]
pub struct Unreadable {
    pub source_name: String,
    pub error: IngestError,
}

/// Collects the images in `dir` in lexicographic file-name order together with
/// their sidecars. Non-image files other than sidecars are ignored.
pub fn scan_dir(dir: &Path) -> std::io::Result<Vec<Result<IngestItem, Unreadable>>> {
    let mut names: Vec<String> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_ok_and(|t| t.is_file()))
        .filter_map(|e| e.file_name().into_string().ok())
        .collect();
    names.sort();
    let mut out = Vec::new();
    for name in names.iter().filter(|n| is_image_name(n)) {
        out.push(read_item(dir, name));
    }
    Ok(out)
}

fn read_item(dir: &Path, name: &str) -> Result<IngestItem, Unreadable> {
    let fail = |error| Unreadable { source_name: name.to_string(), error };
    let read = |file: &str| {
        std::fs::read(dir.join(file)).map_err(|e| IngestError::Read { name: file.to_string(), detail: e.to_string() })
    };
    let optional = |file: String| -> Result<Option<Vec<u8>>, IngestError> {
        if dir.join(&file).is_file() {
            read(&file).map(Some)
        } else {
            Ok(None)
        }
    };
    let bytes = read(name).map_err(fail)?;
    let geo_name = format!("{}{GEO_SUFFIX}", stem(name));
    let sidecar = optional(geo_name.clone())
        .and_then(|b| b.map(|b| GeoSidecar::parse(&geo_name, &b)).transpose())
        .map_err(fail)?;
    let prediction = optional(format!("{}{PRED_SUFFIX}", stem(name))).map_err(fail)?;
    Ok(IngestItem { source_name: name.to_string(), bytes, sidecar, prediction })
}
