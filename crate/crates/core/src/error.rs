use thiserror::Error;

/// Errors raised by the pure geometry primitives.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("homography estimation failed: {0}")]
    Estimation(String),
    #[error("projective mapping failed: {0}")]
    Mapping(String),
    #[error("invalid argument: {0}")]
    Argument(String),
}

/// Errors raised while running the processing pipeline on one image.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("image decode failed: {0}")]
    Decode(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("pipeline stage `{stage}` failed: {detail}")]
    Stage { stage: &'static str, detail: String },
    #[error("annotation error: {0}")]
    Annotation(String),
}

/// Errors raised by the datastore.
#[derive(Debug, Error)]
pub enum StoreError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("referential integrity: {0}")]
    Integrity(String),
    #[error("invalid transition: {0}")]
    InvalidTransition(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("storage i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt store: {0}")]
    Corrupt(String),
}

impl From<serde_json::Error> for StoreError {
    fn from(e: serde_json::Error) -> Self {
        StoreError::Corrupt(e.to_string())
    }
}

/// Why one input image could not be turned into stored records.
#[derive(Debug, Error)]
pub enum IngestError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("no geolocation for {0}: add a .geo.json sidecar or configure default_geo")]
    MissingGeo(String),
    #[error("bad sidecar {name}: {detail}")]
    Sidecar { name: String, detail: String },
    #[error("cannot read {name}: {detail}")]
    Read { name: String, detail: String },
}
