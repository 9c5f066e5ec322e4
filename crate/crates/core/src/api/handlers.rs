use std::collections::BTreeMap;

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Multipart, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use serde_json::{json, Value};

use super::error::ApiError;
use super::jobs::{upload_dir, ManifestItem, UploadManifest, MANIFEST};
use super::AppState;
use crate::ingest::{is_image_name, GeoSidecar, GEO_SUFFIX, PRED_SUFFIX};
use crate::pipeline::DefectClass;
use crate::store::{
    export_report, DefectFilter, DefectRecord, ExportFormat, GeoBox, GeoPoint, ProcessingJob, RecordId, ValidationState,
};

type Params = Result<Query<Vec<(String, String)>>, QueryRejection>;

/// Query pairs as a map; repeated or unexpected keys are rejected.
fn params(q: Params, allowed: &[&str]) -> Result<BTreeMap<String, String>, ApiError> {
    let Query(pairs) = q.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let mut out = BTreeMap::new();
    for (k, v) in pairs {
        if !allowed.contains(&k.as_str()) {
            return Err(ApiError::bad_request(format!("unknown query parameter `{k}`")));
        }
        if out.insert(k.clone(), v).is_some() {
            return Err(ApiError::bad_request(format!("query parameter `{k}` given twice")));
        }
    }
    Ok(out)
}

const FILTER_KEYS: [&str; 7] = ["class", "status", "min_lat", "min_lon", "max_lat", "max_lon", "image_id"];

fn list<T: std::str::FromStr>(raw: &str, what: &str) -> Result<Vec<T>, ApiError>
where
    T::Err: std::fmt::Display,
{
    raw.split(',').map(|s| s.trim().parse::<T>().map_err(|e| ApiError::bad_request(format!("{what}: {e}")))).collect()
}

fn number(p: &BTreeMap<String, String>, key: &str) -> Result<Option<f64>, ApiError> {
    p.get(key)
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| ApiError::bad_request(format!("{key}: `{s}` is not a number")))
        })
        .transpose()
}

fn filter_from(p: &BTreeMap<String, String>) -> Result<DefectFilter, ApiError> {
    let classes = p.get("class").map(|s| list::<DefectClass>(s, "class")).transpose()?;
    let statuses = p.get("status").map(|s| list::<ValidationState>(s, "status")).transpose()?;
    let image_id = p
        .get("image_id")
        .map(|s| s.parse::<RecordId>().map_err(|e| ApiError::bad_request(format!("image_id: {e}"))))
        .transpose()?;
    let corners = [number(p, "min_lat")?, number(p, "min_lon")?, number(p, "max_lat")?, number(p, "max_lon")?];
    let geo_box = match corners {
        [None, None, None, None] => None,
        [Some(a), Some(b), Some(c), Some(d)] => {
            let bad = |e: crate::error::StoreError| ApiError::bad_request(e.to_string());
            Some(GeoBox::new(GeoPoint::new(a, b).map_err(bad)?, GeoPoint::new(c, d).map_err(bad)?).map_err(bad)?)
        }
        _ => return Err(ApiError::bad_request("min_lat, min_lon, max_lat and max_lon go together")),
    };
    Ok(DefectFilter { classes, statuses, geo_box, image_id })
}

/// Malformed and unknown ids are both "no such record".
fn record_id(raw: &str, what: &str) -> Result<RecordId, ApiError> {
    raw.parse().map_err(|_| ApiError::not_found(format!("{what} {raw}")))
}

pub async fn list_defects(State(st): State<AppState>, q: Params) -> Result<Json<Vec<DefectRecord>>, ApiError> {
    let filter = filter_from(&params(q, &FILTER_KEYS)?)?;
    Ok(Json(st.store.query_defects(&filter)?))
}

#[derive(Serialize)]
struct DefectView {
    #[serde(flatten)]
    record: DefectRecord,
    image_url: String,
    mask_url: String,
}

fn file_url(rel: &str) -> String {
    format!("/files/{rel}")
}

pub async fn get_defect(State(st): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let record = st.store.get_defect(&record_id(&id, "defect")?)?;
    let image = st.store.get_image(&record.image_id)?;
    let view = DefectView { image_url: file_url(&image.path), mask_url: file_url(&record.mask_path), record };
    Ok(Json(view).into_response())
}

/// `{status, user}`: not JSON at all is 400, anything else wrong with it is 422.
fn validation_body(body: &Bytes) -> Result<(ValidationState, String), ApiError> {
    let v: Value = serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("body is not JSON: {e}")))?;
    let obj = v.as_object().ok_or_else(|| ApiError::bad_request("body must be a JSON object"))?;
    let status = obj
        .get("status")
        .and_then(Value::as_str)
        .ok_or_else(|| ApiError::unprocessable("`status` must be a string"))?;
    let status: ValidationState =
        status.parse().map_err(|e: crate::error::StoreError| ApiError::unprocessable(e.to_string()))?;
    if status == ValidationState::Unchecked {
        return Err(ApiError::unprocessable("status must be Confirmed or Rejected"));
    }
    let user = obj
        .get("user")
        .and_then(Value::as_str)
        .map(str::trim)
        .filter(|u| !u.is_empty())
        .ok_or_else(|| ApiError::unprocessable("`user` must be a non-empty string"))?;
    Ok((status, user.to_string()))
}

pub async fn validate_defect(
    State(st): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<DefectRecord>, ApiError> {
    let id = record_id(&id, "defect")?;
    st.store.get_defect(&id)?;
    let (status, user) = validation_body(&body)?;
    Ok(Json(st.store.set_validation(&id, status, &user)?))
}

pub async fn list_markings(State(st): State<AppState>, q: Params) -> Result<Response, ApiError> {
    let p = params(q, &["image_id"])?;
    let image_id = p
        .get("image_id")
        .map(|s| s.parse::<RecordId>().map_err(|e| ApiError::bad_request(format!("image_id: {e}"))))
        .transpose()?;
    Ok(Json(st.store.query_markings(image_id.as_ref())).into_response())
}

pub async fn validate_marking(
    State(st): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let id = record_id(&id, "marking")?;
    st.store.get_marking(&id)?;
    let (status, user) = validation_body(&body)?;
    Ok(Json(st.store.set_marking_validation(&id, status, &user)?).into_response())
}

pub async fn get_job(State(st): State<AppState>, Path(id): Path<String>) -> Result<Json<ProcessingJob>, ApiError> {
    Ok(Json(st.store.get_job(&record_id(&id, "job")?)?))
}

/// Plain file name: no separators, no leading dot, no control characters.
fn upload_name(raw: &str) -> Result<String, ApiError> {
    let ok = !raw.is_empty()
        && !raw.starts_with('.')
        && raw.len() <= 255
        && !raw.chars().any(|c| c == '/' || c == '\\' || c.is_control());
    if ok {
        Ok(raw.to_string())
    } else {
        Err(ApiError::bad_request(format!("illegal file name `{raw}`")))
    }
}

pub async fn upload(
    State(st): State<AppState>,
    multipart: Result<Multipart, axum::extract::multipart::MultipartRejection>,
) -> Result<Response, ApiError> {
    let mut multipart = multipart.map_err(|e| ApiError::new(e.status(), e.body_text()))?;
    let mut files: BTreeMap<String, Bytes> = BTreeMap::new();
    while let Some(field) = multipart.next_field().await.map_err(|e| ApiError::new(e.status(), e.body_text()))? {
        let Some(name) = field.file_name().map(upload_name).transpose()? else {
            return Err(ApiError::bad_request("every part must be a file with a file name"));
        };
        let bytes = field.bytes().await.map_err(|e| ApiError::new(e.status(), e.body_text()))?;
        if files.insert(name.clone(), bytes).is_some() {
            return Err(ApiError::bad_request(format!("file `{name}` uploaded twice")));
        }
    }

    let mut images = Vec::new();
    let mut geo = BTreeMap::new();
    let mut preds = BTreeMap::new();
    for (name, bytes) in &files {
        if let Some(stem) = name.strip_suffix(GEO_SUFFIX) {
            let side = GeoSidecar::parse(name, bytes).map_err(|e| ApiError::bad_request(e.to_string()))?;
            geo.insert(stem.to_string(), side);
        } else if let Some(stem) = name.strip_suffix(PRED_SUFFIX) {
            preds.insert(stem.to_string(), name.clone());
        } else if is_image_name(name) {
            images.push(name.clone());
        } else {
            return Err(ApiError::bad_request(format!("unsupported file `{name}`")));
        }
    }
    if images.is_empty() {
        return Err(ApiError::bad_request("upload contains no images"));
    }
    let mut items = Vec::with_capacity(images.len());
    for image in images {
        let stem = crate::ingest::stem(&image).to_string();
        let sidecar = geo.remove(&stem);
        if sidecar.is_none() && st.cfg.default_geo.is_none() {
            return Err(ApiError::bad_request(format!(
                "`{image}` has no {stem}{GEO_SUFFIX} and no default location is configured"
            )));
        }
        items.push(ManifestItem { image, sidecar, prediction: preds.remove(&stem) });
    }
    if let Some(orphan) = geo.keys().chain(preds.keys()).next() {
        return Err(ApiError::bad_request(format!("sidecar for `{orphan}` has no matching image")));
    }

    let job_id = RecordId::generate();
    let dir = upload_dir(&job_id);
    for (name, bytes) in &files {
        st.store.write_file(&format!("{dir}/{name}"), bytes)?;
    }
    let manifest = UploadManifest { items };
    let manifest_bytes = serde_json::to_vec_pretty(&manifest)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    st.store.write_file(&format!("{dir}/{MANIFEST}"), &manifest_bytes)?;
    st.store.put_job(ProcessingJob::queued(job_id, manifest.items.len(), st.store.now()))?;
    st.jobs.enqueue(job_id)?;
    log::info!("job {job_id} queued with {} images", manifest.items.len());
    Ok((StatusCode::ACCEPTED, Json(json!({ "job_id": job_id }))).into_response())
}

pub async fn export(State(st): State<AppState>, q: Params) -> Result<Response, ApiError> {
    let mut keys = FILTER_KEYS.to_vec();
    keys.extend(["format", "validated_only"]);
    let p = params(q, &keys)?;
    let format: ExportFormat = p
        .get("format")
        .ok_or_else(|| ApiError::bad_request("format is required (csv or json)"))?
        .parse()
        .map_err(|e: crate::error::StoreError| ApiError::bad_request(e.to_string()))?;
    let validated_only = match p.get("validated_only").map(String::as_str) {
        None | Some("false") => false,
        Some("true") => true,
        Some(other) => {
            return Err(ApiError::bad_request(format!("validated_only must be true or false, not `{other}`")))
        }
    };
    let body = export_report(&st.store, format, &filter_from(&p)?, validated_only)?;
    let disposition = format!("attachment; filename=\"roadatlas-report.{}\"", format.extension());
    Ok(([(header::CONTENT_TYPE, format.content_type().to_string()), (header::CONTENT_DISPOSITION, disposition)], body)
        .into_response())
}

fn png(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "image/png")], bytes).into_response()
}

/// Serves only anonymized images that belong to an image record.
pub async fn image_file(State(st): State<AppState>, Path(name): Path<String>) -> Result<Response, ApiError> {
    let rel = format!("images/{name}");
    match st.store.find_image_by_path(&rel) {
        Some(asset) if asset.anonymized => Ok(png(st.store.read_file(&rel)?)),
        _ => Err(ApiError::not_found(rel)),
    }
}

pub async fn mask_file(State(st): State<AppState>, Path(name): Path<String>) -> Result<Response, ApiError> {
    let rel = format!("masks/{name}");
    st.store.read_file(&rel).map(png).map_err(|_| ApiError::not_found(rel))
}

pub async fn not_found() -> ApiError {
    ApiError::not_found("no such route")
}

pub async fn method_not_allowed() -> ApiError {
    ApiError::new(StatusCode::METHOD_NOT_ALLOWED, "method not allowed on this route")
}
