//! Embedded, file-backed persistence for images, defects, markings and jobs.
//!
//! Layout under the data root:
//!
//! ```text
//! <root>/images/     anonymized images, PNG
//! <root>/masks/      per-defect binary masks, PNG
//! <root>/uploads/    raw uploads awaiting processing, one folder per job
//! <root>/store/journal.jsonl
//! ```
//!
//! Every mutation is appended to the journal as one JSON line before it is
//! applied in memory; opening a store replays the journal. Writes are
//! serialized behind a single lock, reads share it.

mod export;
mod model;

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Component, Path, PathBuf};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

pub use export::{export_report, ExportFormat, ExportRow, CSV_HEADER};
pub use model::{
    timestamp, Clock, DefectFilter, DefectRecord, GeoBox, GeoPoint, ImageAsset, JobFailure, JobState, MarkingRecord,
    NewDefect, NewImage, NewMarking, ProcessingJob, RecordId, SystemClock, Validation, ValidationState,
};

use crate::error::StoreError;
use crate::pipeline::DefectClass;

const JOURNAL: &str = "store/journal.jsonl";
const LOCK: &str = "store/lock";

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "op", content = "data", rename_all = "snake_case")]
enum Entry {
    Image(ImageAsset),
    Defect(DefectRecord),
    Marking(MarkingRecord),
    DefectValidation { id: RecordId, validation: Validation },
    MarkingValidation { id: RecordId, validation: Validation },
    Job(ProcessingJob),
}

#[derive(Default)]
struct State {
    images: HashMap<RecordId, ImageAsset>,
    defects: HashMap<RecordId, DefectRecord>,
    markings: HashMap<RecordId, MarkingRecord>,
    jobs: HashMap<RecordId, ProcessingJob>,
}

impl State {
    fn apply(&mut self, entry: Entry) {
        match entry {
            Entry::Image(a) => {
                self.images.insert(a.id, a);
            }
            Entry::Defect(d) => {
                self.defects.insert(d.id, d);
            }
            Entry::Marking(m) => {
                self.markings.insert(m.id, m);
            }
            Entry::DefectValidation { id, validation } => {
                if let Some(d) = self.defects.get_mut(&id) {
                    d.validation = validation;
                }
            }
            Entry::MarkingValidation { id, validation } => {
                if let Some(m) = self.markings.get_mut(&id) {
                    m.validation = validation;
                }
            }
            Entry::Job(j) => {
                self.jobs.insert(j.id, j);
            }
        }
    }

    fn id_taken(&self, id: &RecordId) -> bool {
        self.images.contains_key(id) || self.defects.contains_key(id) || self.markings.contains_key(id)
    }
}

struct Inner {
    state: State,
    journal: File,
}

pub struct Store {
    root: PathBuf,
    inner: RwLock<Inner>,
    clock: Arc<dyn Clock>,
    /// Held for the store's lifetime so only one process uses a data root.
    _lock: File,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store").field("root", &self.root).finish_non_exhaustive()
    }
}

impl Store {
    /// Opens (creating if needed) the store under `root`.
    pub fn open(root: impl AsRef<Path>) -> Result<Self, StoreError> {
        Self::open_with_clock(root, Arc::new(SystemClock))
    }

    pub fn open_with_clock(root: impl AsRef<Path>, clock: Arc<dyn Clock>) -> Result<Self, StoreError> {
        let root = root.as_ref().to_path_buf();
        for dir in ["images", "masks", "uploads", "store"] {
            fs::create_dir_all(root.join(dir))?;
        }
        let lock = OpenOptions::new().create(true).truncate(false).write(true).open(root.join(LOCK))?;
        match lock.try_lock() {
            Ok(()) => {}
            Err(fs::TryLockError::WouldBlock) => {
                return Err(StoreError::Conflict(format!("data root {} is in use by another store", root.display())))
            }
            Err(fs::TryLockError::Error(e)) => return Err(e.into()),
        }
        let path = root.join(JOURNAL);
        let mut state = State::default();
        let bytes = if path.exists() { fs::read(&path)? } else { Vec::new() };
        let mut good_len = 0usize;
        let mut offset = 0usize;
        let mut lines = bytes.split(|&b| b == b'\n').peekable();
        let mut line_no = 0usize;
        while let Some(line) = lines.next() {
            line_no += 1;
            let is_last = lines.peek().is_none();
            let next_offset = offset + line.len() + usize::from(!is_last);
            if line.iter().all(u8::is_ascii_whitespace) {
                offset = next_offset;
                if !is_last {
                    good_len = offset;
                }
                continue;
            }
            if is_last {
                // No trailing newline: a torn append whose write never completed.
                log::warn!("discarding incomplete journal tail ({} bytes)", line.len());
                break;
            }
            let entry = serde_json::from_slice::<Entry>(line)
                .map_err(|e| StoreError::Corrupt(format!("journal line {line_no}: {e}")))?;
            state.apply(entry);
            good_len = next_offset;
            offset = next_offset;
        }
        let journal = OpenOptions::new().create(true).append(true).open(&path)?;
        if good_len < bytes.len() {
            journal.set_len(good_len as u64)?;
        }
        Ok(Self { root, inner: RwLock::new(Inner { state, journal }), clock, _lock: lock })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn now(&self) -> chrono::DateTime<chrono::Utc> {
        self.clock.now()
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, Inner> {
        self.inner.read().unwrap_or_else(|e| e.into_inner())
    }

    fn write(&self) -> std::sync::RwLockWriteGuard<'_, Inner> {
        self.inner.write().unwrap_or_else(|e| e.into_inner())
    }

    fn commit(inner: &mut Inner, entry: Entry) -> Result<(), StoreError> {
        let mut line = serde_json::to_vec(&entry)?;
        line.push(b'\n');
        inner.journal.write_all(&line)?;
        inner.journal.flush()?;
        inner.state.apply(entry);
        Ok(())
    }

    // ---- images ------------------------------------------------------------

    pub fn insert_image(&self, new: NewImage) -> Result<RecordId, StoreError> {
        if new.path.trim().is_empty() {
            return Err(StoreError::Argument("image path must not be empty".into()));
        }
        let mut inner = self.write();
        let id = new.id.unwrap_or_else(RecordId::generate);
        if inner.state.id_taken(&id) {
            return Err(StoreError::Conflict(format!("id {id} already exists")));
        }
        let asset = ImageAsset {
            id,
            path: new.path,
            captured_at: new.captured_at,
            geo: new.geo,
            anonymized: new.anonymized,
            source_name: new.source_name,
        };
        Self::commit(&mut inner, Entry::Image(asset))?;
        Ok(id)
    }

    pub fn get_image(&self, id: &RecordId) -> Result<ImageAsset, StoreError> {
        self.read().state.images.get(id).cloned().ok_or_else(|| StoreError::NotFound(format!("image {id}")))
    }

    pub fn find_image_by_path(&self, path: &str) -> Option<ImageAsset> {
        self.read().state.images.values().find(|a| a.path == path).cloned()
    }

    pub fn has_source(&self, source_name: &str) -> bool {
        self.read().state.images.values().any(|a| a.source_name == source_name)
    }

    /// All images sorted by capture time then id.
    pub fn images(&self) -> Vec<ImageAsset> {
        let mut v: Vec<_> = self.read().state.images.values().cloned().collect();
        v.sort_by_key(|a| (a.captured_at, a.id));
        v
    }

    // ---- defects -----------------------------------------------------------

    pub fn insert_defect(&self, new: NewDefect) -> Result<RecordId, StoreError> {
        if new.class == DefectClass::Background {
            return Err(StoreError::Argument("a defect cannot be background".into()));
        }
        if !(0.0..=1.0).contains(&new.confidence) {
            return Err(StoreError::Argument(format!("confidence {} outside [0,1]", new.confidence)));
        }
        let created_at = self.clock.now();
        let mut inner = self.write();
        if !inner.state.images.contains_key(&new.image_id) {
            return Err(StoreError::Integrity(format!("unknown image {}", new.image_id)));
        }
        let id = new.id.unwrap_or_else(RecordId::generate);
        if inner.state.id_taken(&id) {
            return Err(StoreError::Conflict(format!("id {id} already exists")));
        }
        let record = DefectRecord {
            id,
            image_id: new.image_id,
            class: new.class,
            bbox: new.bbox,
            mask_path: new.mask_path,
            confidence: new.confidence,
            geo: new.geo,
            validation: Validation::unchecked(),
            created_at,
        };
        Self::commit(&mut inner, Entry::Defect(record))?;
        Ok(id)
    }

    pub fn get_defect(&self, id: &RecordId) -> Result<DefectRecord, StoreError> {
        self.read().state.defects.get(id).cloned().ok_or_else(|| StoreError::NotFound(format!("defect {id}")))
    }

    /// Records matching every predicate of `filter`, sorted by `created_at` then id.
    pub fn query_defects(&self, filter: &DefectFilter) -> Result<Vec<DefectRecord>, StoreError> {
        if let Some(b) = &filter.geo_box {
            GeoBox::new(b.min, b.max)?;
        }
        let mut out: Vec<DefectRecord> =
            self.read().state.defects.values().filter(|r| filter.matches(r)).cloned().collect();
        out.sort_by_key(|a| (a.created_at, a.id));
        Ok(out)
    }

    pub fn set_validation(
        &self,
        id: &RecordId,
        status: ValidationState,
        user: &str,
    ) -> Result<DefectRecord, StoreError> {
        let now = self.clock.now();
        let mut inner = self.write();
        let current =
            inner.state.defects.get(id).ok_or_else(|| StoreError::NotFound(format!("defect {id}")))?.validation.clone();
        if let Some(v) = next_validation(&current, status, user, now)? {
            Self::commit(&mut inner, Entry::DefectValidation { id: *id, validation: v })?;
        }
        Ok(inner.state.defects[id].clone())
    }

    // ---- markings ----------------------------------------------------------

    pub fn insert_marking(&self, new: NewMarking) -> Result<RecordId, StoreError> {
        if !(0.0..=1.0).contains(&new.coverage) {
            return Err(StoreError::Argument(format!("coverage {} outside [0,1]", new.coverage)));
        }
        if new.coverage < new.threshold {
            return Err(StoreError::Argument(format!(
                "coverage {} below keep threshold {}",
                new.coverage, new.threshold
            )));
        }
        let created_at = self.clock.now();
        let mut inner = self.write();
        if !inner.state.images.contains_key(&new.image_id) {
            return Err(StoreError::Integrity(format!("unknown image {}", new.image_id)));
        }
        let id = new.id.unwrap_or_else(RecordId::generate);
        if inner.state.id_taken(&id) {
            return Err(StoreError::Conflict(format!("id {id} already exists")));
        }
        let record = MarkingRecord {
            id,
            image_id: new.image_id,
            contour: new.contour,
            coverage: new.coverage,
            threshold: new.threshold,
            validation: Validation::unchecked(),
            created_at,
        };
        Self::commit(&mut inner, Entry::Marking(record))?;
        Ok(id)
    }

    pub fn get_marking(&self, id: &RecordId) -> Result<MarkingRecord, StoreError> {
        self.read().state.markings.get(id).cloned().ok_or_else(|| StoreError::NotFound(format!("marking {id}")))
    }

    pub fn query_markings(&self, image_id: Option<&RecordId>) -> Vec<MarkingRecord> {
        let mut out: Vec<MarkingRecord> = self
            .read()
            .state
            .markings
            .values()
            .filter(|m| image_id.is_none_or(|id| *id == m.image_id))
            .cloned()
            .collect();
        out.sort_by_key(|a| (a.created_at, a.id));
        out
    }

    pub fn set_marking_validation(
        &self,
        id: &RecordId,
        status: ValidationState,
        user: &str,
    ) -> Result<MarkingRecord, StoreError> {
        let now = self.clock.now();
        let mut inner = self.write();
        let current = inner
            .state
            .markings
            .get(id)
            .ok_or_else(|| StoreError::NotFound(format!("marking {id}")))?
            .validation
            .clone();
        if let Some(v) = next_validation(&current, status, user, now)? {
            Self::commit(&mut inner, Entry::MarkingValidation { id: *id, validation: v })?;
        }
        Ok(inner.state.markings[id].clone())
    }

    // ---- jobs --------------------------------------------------------------

    /// Inserts or updates a job; state may only move forward.
    pub fn put_job(&self, job: ProcessingJob) -> Result<(), StoreError> {
        if job.processed + job.failures.len() > job.total_images {
            return Err(StoreError::Argument("job progress exceeds its image count".into()));
        }
        if job.state.is_terminal() != job.finished_at.is_some() {
            return Err(StoreError::Argument("finished_at must be set exactly for terminal jobs".into()));
        }
        let mut inner = self.write();
        if let Some(old) = inner.state.jobs.get(&job.id) {
            if !old.state.can_become(job.state) || (old.state.is_terminal() && *old != job) {
                return Err(StoreError::InvalidTransition(format!(
                    "job {} cannot move from {:?} to {:?}",
                    job.id, old.state, job.state
                )));
            }
        }
        Self::commit(&mut inner, Entry::Job(job))
    }

    pub fn get_job(&self, id: &RecordId) -> Result<ProcessingJob, StoreError> {
        self.read().state.jobs.get(id).cloned().ok_or_else(|| StoreError::NotFound(format!("job {id}")))
    }

    /// Jobs sorted by submission time then id.
    pub fn jobs(&self) -> Vec<ProcessingJob> {
        let mut v: Vec<_> = self.read().state.jobs.values().cloned().collect();
        v.sort_by_key(|a| (a.submitted_at, a.id));
        v
    }

    // ---- files -------------------------------------------------------------

    /// Resolves a data-root-relative path, refusing anything that escapes the root.
    pub fn resolve(&self, rel: &str) -> Result<PathBuf, StoreError> {
        let p = Path::new(rel);
        if rel.is_empty() || !p.components().all(|c| matches!(c, Component::Normal(_))) {
            return Err(StoreError::Argument(format!("illegal storage path `{rel}`")));
        }
        Ok(self.root.join(p))
    }

    /// Writes `bytes` atomically at a root-relative path, returning that path.
    pub fn write_file(&self, rel: &str, bytes: &[u8]) -> Result<String, StoreError> {
        let dest = self.resolve(rel)?;
        if let Some(parent) = dest.parent() {
            fs::create_dir_all(parent)?;
        }
        let tmp = dest.with_extension(format!("tmp-{}", RecordId::generate()));
        fs::write(&tmp, bytes)?;
        fs::rename(&tmp, &dest)?;
        Ok(rel.to_string())
    }

    pub fn read_file(&self, rel: &str) -> Result<Vec<u8>, StoreError> {
        let path = self.resolve(rel)?;
        fs::read(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => StoreError::NotFound(rel.to_string()),
            _ => StoreError::Io(e),
        })
    }
}

/// Applies the review state machine. `Ok(None)` means the call is a no-op repeat.
fn next_validation(
    current: &Validation,
    status: ValidationState,
    user: &str,
    now: chrono::DateTime<chrono::Utc>,
) -> Result<Option<Validation>, StoreError> {
    if status == ValidationState::Unchecked {
        return Err(StoreError::InvalidTransition("a record cannot return to Unchecked".into()));
    }
    let user = user.trim();
    if user.is_empty() {
        return Err(StoreError::Argument("user must not be empty".into()));
    }
    if current.status == status && current.checked_by.as_deref() == Some(user) {
        return Ok(None);
    }
    Ok(Some(Validation { status, checked_by: Some(user.to_string()), checked_at: Some(now) }))
}
