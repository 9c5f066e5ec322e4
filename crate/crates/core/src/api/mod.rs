//! HTTP API over the datastore and the upload job queue.
//!
//! | route | |
//! |---|---|
//! | `GET /api/defects` | filtered list (`class`, `status`, `min_lat`, `min_lon`, `max_lat`, `max_lon`, `image_id`) |
//! | `GET /api/defects/{id}` | record plus `image_url` and `mask_url` |
//! | `POST /api/defects/{id}/validation` | `{"status": "Confirmed" \| "Rejected", "user": ".."}` |
//! | `GET /api/markings?image_id=` | marking records |
//! | `POST /api/markings/{id}/validation` | as for defects |
//! | `POST /api/uploads` | multipart images and sidecars, answers 202 `{"job_id"}` |
//! | `GET /api/jobs/{id}` | job snapshot |
//! | `GET /api/export?format=csv\|json&validated_only=` | report download (accepts the defect filters too) |
//! | `GET /files/images/{name}`, `GET /files/masks/{name}` | stored PNGs |
//!
//! Every non-2xx response carries `{"error": .., "detail": ..}`.

mod error;
mod handlers;
mod jobs;

use std::sync::Arc;

use axum::extract::DefaultBodyLimit;
use axum::routing::{get, post};
use axum::Router;

pub use error::{ApiError, ErrorBody};
pub use jobs::{upload_dir, JobRunner, ManifestItem, UploadManifest, MANIFEST};

use crate::pipeline::PipelineConfig;
use crate::store::Store;

/// Upload bodies may carry whole image batches.
pub const MAX_BODY_BYTES: usize = 512 * 1024 * 1024;

#[derive(Clone, Debug)]
pub struct AppState {
    pub store: Arc<Store>,
    pub cfg: Arc<PipelineConfig>,
    pub jobs: Arc<JobRunner>,
}

pub fn router(state: AppState) -> Router {
    router_with_body_limit(state, MAX_BODY_BYTES)
}

/// [`router`] with a different request body limit.
pub fn router_with_body_limit(state: AppState, max_body_bytes: usize) -> Router {
    Router::new()
        .route("/api/defects", get(handlers::list_defects))
        .route("/api/defects/{id}", get(handlers::get_defect))
        .route("/api/defects/{id}/validation", post(handlers::validate_defect))
        .route("/api/markings", get(handlers::list_markings))
        .route("/api/markings/{id}/validation", post(handlers::validate_marking))
        .route("/api/uploads", post(handlers::upload))
        .route("/api/jobs/{id}", get(handlers::get_job))
        .route("/api/export", get(handlers::export))
        .route("/files/images/{name}", get(handlers::image_file))
        .route("/files/masks/{name}", get(handlers::mask_file))
        .fallback(handlers::not_found)
        .method_not_allowed_fallback(handlers::method_not_allowed)
        .layer(DefaultBodyLimit::max(max_body_bytes))
        .with_state(state)
}
