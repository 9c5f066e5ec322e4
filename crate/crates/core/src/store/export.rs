//! CSV / JSON report export.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::model::{timestamp, DefectFilter, DefectRecord, ValidationState};
use super::Store;
use crate::error::StoreError;
use crate::pipeline::DefectClass;

pub const CSV_HEADER: &str =
    "id,image_id,class,lat,lon,x_min,y_min,x_max,y_max,confidence,status,checked_by,checked_at";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Json,
}

impl ExportFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Json => "json",
        }
    }

    pub fn content_type(&self) -> &'static str {
        match self {
            Self::Csv => "text/csv; charset=utf-8",
            Self::Json => "application/json",
        }
    }
}

impl FromStr for ExportFormat {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(StoreError::Argument(format!("unknown export format `{other}`"))),
        }
    }
}

/// One exported defect; field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportRow {
    pub id: String,
    pub image_id: String,
    pub class: DefectClass,
    pub lat: f64,
    pub lon: f64,
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
    pub confidence: f64,
    pub status: ValidationState,
    pub checked_by: Option<String>,
    pub checked_at: Option<String>,
}

impl From<&DefectRecord> for ExportRow {
    fn from(r: &DefectRecord) -> Self {
        Self {
            id: r.id.to_string(),
            image_id: r.image_id.to_string(),
            class: r.class,
            lat: r.geo.lat,
            lon: r.geo.lon,
            x_min: r.bbox.x_min,
            y_min: r.bbox.y_min,
            x_max: r.bbox.x_max,
            y_max: r.bbox.y_max,
            confidence: r.confidence,
            status: r.validation.status,
            checked_by: r.validation.checked_by.clone(),
            checked_at: r.validation.checked_at.as_ref().map(timestamp::format),
        }
    }
}

/// Serializes the matching records; with `validated_only`, unchecked records are left out.
pub fn export_report(
    store: &Store,
    format: ExportFormat,
    filter: &DefectFilter,
    validated_only: bool,
) -> Result<Vec<u8>, StoreError> {
    let rows: Vec<ExportRow> = store
        .query_defects(filter)?
        .iter()
        .filter(|r| !validated_only || r.validation.status != ValidationState::Unchecked)
        .map(ExportRow::from)
        .collect();
    match format {
        ExportFormat::Json => Ok(serde_json::to_vec(&rows)?),
        ExportFormat::Csv => {
            let mut w = csv::WriterBuilder::new()
                .has_headers(false)
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(Vec::new());
            w.write_record(CSV_HEADER.split(',')).map_err(|e| StoreError::Corrupt(e.to_string()))?;
            for row in &rows {
                w.serialize(row).map_err(|e| StoreError::Corrupt(e.to_string()))?;
            }
            w.into_inner().map_err(|e| StoreError::Corrupt(e.to_string()))
        }
    }
}
