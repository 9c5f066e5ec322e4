//! Persisted entities.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, SubsecRound, Utc};
use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::error::StoreError;
use crate::geometry::{BoundingBox, Contour};
use crate::pipeline::DefectClass;

/// UUID-format record identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RecordId(Uuid);

impl RecordId {
    pub fn generate() -> Self {
        Self(Uuid::new_v4())
    }

    pub fn from_uuid(u: Uuid) -> Self {
        Self(u)
    }
}

impl fmt::Display for RecordId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.hyphenated().fmt(f)
    }
}

impl FromStr for RecordId {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Uuid::parse_str(s).map(Self).map_err(|_| StoreError::Argument(format!("malformed id `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGeo")]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

#[derive(Deserialize)]
struct RawGeo {
    lat: f64,
    lon: f64,
}

impl TryFrom<RawGeo> for GeoPoint {
    type Error = StoreError;

    fn try_from(r: RawGeo) -> Result<Self, Self::Error> {
        GeoPoint::new(r.lat, r.lon)
    }
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, StoreError> {
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(StoreError::Argument(format!("coordinates out of range: lat={lat}, lon={lon}")));
        }
        Ok(Self { lat, lon })
    }
}

/// Inclusive latitude/longitude rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoBox {
    pub min: GeoPoint,
    pub max: GeoPoint,
}

impl GeoBox {
    pub fn new(min: GeoPoint, max: GeoPoint) -> Result<Self, StoreError> {
        if min.lat > max.lat || min.lon > max.lon {
            return Err(StoreError::Argument("geo box corners are not ordered".into()));
        }
        Ok(Self { min, max })
    }

    pub fn contains(&self, p: &GeoPoint) -> bool {
        p.lat >= self.min.lat && p.lat <= self.max.lat && p.lon >= self.min.lon && p.lon <= self.max.lon
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ValidationState {
    Unchecked,
    Confirmed,
    Rejected,
}

impl ValidationState {
    pub const ALL: [ValidationState; 3] = [Self::Unchecked, Self::Confirmed, Self::Rejected];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Unchecked => "Unchecked",
            Self::Confirmed => "Confirmed",
            Self::Rejected => "Rejected",
        }
    }
}

impl FromStr for ValidationState {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| StoreError::Argument(format!("unknown validation status `{s}`")))
    }
}

/// Review state of a record. `checked_by`/`checked_at` are set iff `status != Unchecked`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Validation {
    pub status: ValidationState,
    pub checked_by: Option<String>,
    #[serde(with = "timestamp::option")]
    pub checked_at: Option<DateTime<Utc>>,
}

impl Validation {
    pub fn unchecked() -> Self {
        Self { status: ValidationState::Unchecked, checked_by: None, checked_at: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageAsset {
    pub id: RecordId,
    /// Relative to the data root.
    pub path: String,
    #[serde(with = "timestamp")]
    pub captured_at: DateTime<Utc>,
    pub geo: GeoPoint,
    pub anonymized: bool,
    /// Original file name as received.
    pub source_name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectRecord {
    pub id: RecordId,
    pub image_id: RecordId,
    pub class: DefectClass,
    pub bbox: BoundingBox,
    pub mask_path: String,
    pub confidence: f64,
    pub geo: GeoPoint,
    #[serde(flatten)]
    pub validation: Validation,
    #[serde(with = "timestamp")]
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkingRecord {
    pub id: RecordId,
    pub image_id: RecordId,
    /// Original-image coordinates.
    pub contour: Contour,
    pub coverage: f64,
    /// Keep threshold in force when the record was created.
    pub threshold: f64,
    #[serde(flatten)]
    pub validation: Validation,
    #[serde(with = "timestamp")]
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone)]
pub struct NewImage {
    pub id: Option<RecordId>,
    pub path: String,
    pub captured_at: DateTime<Utc>,
    pub geo: GeoPoint,
    pub anonymized: bool,
    pub source_name: String,
}

#[derive(Debug, Clone)]
pub struct NewDefect {
    pub id: Option<RecordId>,
    pub image_id: RecordId,
    pub class: DefectClass,
    pub bbox: BoundingBox,
    pub mask_path: String,
    pub confidence: f64,
    pub geo: GeoPoint,
}

#[derive(Debug, Clone)]
pub struct NewMarking {
    pub id: Option<RecordId>,
    pub image_id: RecordId,
    pub contour: Contour,
    pub coverage: f64,
    pub threshold: f64,
}

/// Conjunction of optional predicates over defect records.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DefectFilter {
    pub classes: Option<Vec<DefectClass>>,
    pub statuses: Option<Vec<ValidationState>>,
    pub geo_box: Option<GeoBox>,
    pub image_id: Option<RecordId>,
}

impl DefectFilter {
    pub fn matches(&self, r: &DefectRecord) -> bool {
        self.classes.as_ref().is_none_or(|cs| cs.contains(&r.class))
            && self.statuses.as_ref().is_none_or(|ss| ss.contains(&r.validation.status))
            && self.geo_box.as_ref().is_none_or(|b| b.contains(&r.geo))
            && self.image_id.is_none_or(|id| id == r.image_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobState {
    pub fn is_terminal(&self) -> bool {
        matches!(self, Self::Done | Self::Failed)
    }

    /// Queued -> Running -> {Done, Failed}; a job may also fail before it starts.
    pub fn can_become(&self, next: JobState) -> bool {
        use JobState::*;
        *self == next
            || matches!((self, next), (Queued, Running) | (Queued, Failed) | (Running, Done) | (Running, Failed))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobFailure {
    pub image: String,
    pub reason: String,
}

/// One "database update" batch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessingJob {
    pub id: RecordId,
    pub state: JobState,
    #[serde(with = "timestamp")]
    pub submitted_at: DateTime<Utc>,
    #[serde(with = "timestamp::option")]
    pub finished_at: Option<DateTime<Utc>>,
    pub total_images: usize,
    /// Images processed successfully.
    pub processed: usize,
    pub failures: Vec<JobFailure>,
    /// Job-level failure reason, set when the whole job failed.
    pub error: Option<String>,
}

impl ProcessingJob {
    pub fn queued(id: RecordId, total_images: usize, submitted_at: DateTime<Utc>) -> Self {
        Self {
            id,
            state: JobState::Queued,
            submitted_at,
            finished_at: None,
            total_images,
            processed: 0,
            failures: Vec::new(),
            error: None,
        }
    }
}

/// Source of "now" for record timestamps, truncated to whole seconds.
pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now().trunc_subsecs(0)
    }
}

/// RFC 3339 UTC text with second precision.
pub mod timestamp {
    use chrono::{DateTime, SecondsFormat, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn format(t: &DateTime<Utc>) -> String {
        t.to_rfc3339_opts(SecondsFormat::Secs, true)
    }

    pub fn parse(s: &str) -> Result<DateTime<Utc>, chrono::ParseError> {
        DateTime::parse_from_rfc3339(s).map(|t| t.with_timezone(&Utc))
    }

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format(t))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let s = String::deserialize(d)?;
        parse(&s).map_err(serde::de::Error::custom)
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(t: &Option<DateTime<Utc>>, s: S) -> Result<S::Ok, S::Error> {
            match t {
                Some(t) => s.serialize_some(&format(t)),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<DateTime<Utc>>, D::Error> {
            Option::<String>::deserialize(d)?.map(|s| parse(&s).map_err(serde::de::Error::custom)).transpose()
        }
    }
}
