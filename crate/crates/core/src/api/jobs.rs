//! Background execution of upload jobs: one worker thread, FIFO queue.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use serde::{Deserialize, Serialize};

use crate::error::StoreError;
use crate::ingest::{ingest, GeoSidecar, IngestItem};
use crate::pipeline::{Models, PipelineConfig};
use crate::store::{JobFailure, JobState, ProcessingJob, RecordId, Store};

pub const MANIFEST: &str = "manifest.json";

/// What an upload left on disk under `uploads/<job_id>/`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UploadManifest {
    pub items: Vec<ManifestItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestItem {
    /// Image file name inside the upload directory.
    pub image: String,
    pub sidecar: Option<GeoSidecar>,
    pub prediction: Option<String>,
}

pub fn upload_dir(job: &RecordId) -> String {
    format!("uploads/{job}")
}

#[derive(Clone)]
struct Worker {
    store: Arc<Store>,
    models: Models,
    cfg: Arc<PipelineConfig>,
    stop: Arc<AtomicBool>,
}

pub struct JobRunner {
    worker: Worker,
    tx: Mutex<Option<Sender<RecordId>>>,
    rx: Mutex<Option<Receiver<RecordId>>>,
    handle: Mutex<Option<JoinHandle<()>>>,
}

impl std::fmt::Debug for JobRunner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("JobRunner").finish_non_exhaustive()
    }
}

impl JobRunner {
    /// Creates an idle runner and recovers jobs left over from a previous run:
    /// jobs caught `Running` are marked `Failed`, `Queued` jobs are queued again
    /// in submission order. Nothing executes until [`start`](Self::start).
    pub fn new(store: Arc<Store>, models: Models, cfg: Arc<PipelineConfig>) -> Result<Arc<Self>, StoreError> {
        let (tx, rx) = mpsc::channel();
        for mut job in store.jobs() {
            match job.state {
                JobState::Running => {
                    log::warn!("job {} was interrupted; marking it failed", job.id);
                    job.state = JobState::Failed;
                    job.finished_at = Some(store.now());
                    job.error = Some(format!(
                        "interrupted: the service stopped after {} of {} images",
                        job.processed + job.failures.len(),
                        job.total_images
                    ));
                    store.put_job(job)?;
                }
                JobState::Queued => {
                    let _ = tx.send(job.id);
                }
                _ => {}
            }
        }
        Ok(Arc::new(Self {
            worker: Worker { store, models, cfg, stop: Arc::new(AtomicBool::new(false)) },
            tx: Mutex::new(Some(tx)),
            rx: Mutex::new(Some(rx)),
            handle: Mutex::new(None),
        }))
    }

    /// Spawns the worker thread. Calling it twice has no effect.
    pub fn start(&self) {
        let Some(rx) = self.rx.lock().unwrap_or_else(|e| e.into_inner()).take() else { return };
        let me = self.worker.clone();
        let handle = std::thread::Builder::new()
            .name("roadatlas-jobs".into())
            .spawn(move || {
                for id in rx {
                    if me.stop.load(Ordering::SeqCst) {
                        break;
                    }
                    if let Err(e) = me.run(&id) {
                        log::error!("job {id}: {e}");
                    }
                }
            })
            .expect("spawn job worker");
        *self.handle.lock().unwrap_or_else(|e| e.into_inner()) = Some(handle);
    }

    pub fn enqueue(&self, id: RecordId) -> Result<(), StoreError> {
        let tx = self.tx.lock().unwrap_or_else(|e| e.into_inner());
        match tx.as_ref() {
            Some(tx) => tx.send(id).map_err(|_| StoreError::Conflict("job worker has stopped".into())),
            None => Err(StoreError::Conflict("job worker is shutting down".into())),
        }
    }

    /// Lets the in-flight image finish, fails the rest of its job, and joins the worker.
    /// Jobs still queued stay `Queued` and are picked up again on the next start.
    pub fn shutdown(&self) {
        self.worker.stop.store(true, Ordering::SeqCst);
        self.tx.lock().unwrap_or_else(|e| e.into_inner()).take();
        let handle = self.handle.lock().unwrap_or_else(|e| e.into_inner()).take();
        if let Some(h) = handle {
            let _ = h.join();
        }
    }
}

impl Worker {
    fn run(&self, id: &RecordId) -> Result<(), StoreError> {
        let mut job = self.store.get_job(id)?;
        if job.state != JobState::Queued {
            return Ok(());
        }
        let dir = upload_dir(id);
        let manifest = self
            .store
            .read_file(&format!("{dir}/{MANIFEST}"))
            .and_then(|b| serde_json::from_slice::<UploadManifest>(&b).map_err(StoreError::from));
        let manifest = match manifest {
            Ok(m) => m,
            Err(e) => return self.finish(job, JobState::Failed, Some(format!("unreadable upload manifest: {e}"))),
        };

        job.state = JobState::Running;
        self.store.put_job(job.clone())?;
        for item in &manifest.items {
            if self.stop.load(Ordering::SeqCst) {
                let done = job.processed + job.failures.len();
                let msg = format!("interrupted by shutdown after {done} of {} images", job.total_images);
                return self.finish(job, JobState::Failed, Some(msg));
            }
            match self.process_item(&dir, item) {
                Ok(()) => job.processed += 1,
                Err(reason) => {
                    log::warn!("job {id}: {}: {reason}", item.image);
                    job.failures.push(JobFailure { image: item.image.clone(), reason });
                }
            }
            self.store.put_job(job.clone())?;
        }
        self.finish(job, JobState::Done, None)
    }

    fn process_item(&self, dir: &str, item: &ManifestItem) -> Result<(), String> {
        let bytes = self.store.read_file(&format!("{dir}/{}", item.image)).map_err(|e| e.to_string())?;
        let prediction = match &item.prediction {
            Some(p) => Some(self.store.read_file(&format!("{dir}/{p}")).map_err(|e| e.to_string())?),
            None => None,
        };
        let input = IngestItem { source_name: item.image.clone(), bytes, sidecar: item.sidecar.clone(), prediction };
        ingest(&self.store, &input, &self.models, &self.cfg).map(|_| ()).map_err(|e| e.to_string())
    }

    fn finish(&self, mut job: ProcessingJob, state: JobState, error: Option<String>) -> Result<(), StoreError> {
        job.state = state;
        job.error = error;
        job.finished_at = Some(self.store.now());
        self.store.put_job(job)
    }
}

impl Drop for JobRunner {
    fn drop(&mut self) {
        // Dropping the sender ends the worker loop once the queue drains.
        self.worker.stop.store(true, Ordering::SeqCst);
    }
}
