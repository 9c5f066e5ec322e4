//! In-process HTTP harness over the API router.

use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use roadatlas::api::{router, AppState, JobRunner};
use roadatlas::pipeline::{Models, PipelineConfig};
use roadatlas::store::{JobState, Store};
use roadatlas::synthetic::generate_scene;
use serde_json::Value;
use tower::ServiceExt;

pub struct Service {
    pub app: Router,
    pub jobs: Arc<JobRunner>,
    pub store: Arc<Store>,
}

pub fn service(root: &std::path::Path, cfg: PipelineConfig, start: bool) -> Service {
    let store = Arc::new(Store::open(root).unwrap());
    let cfg = Arc::new(cfg);
    let jobs = JobRunner::new(Arc::clone(&store), Models::fallback(&cfg), Arc::clone(&cfg)).unwrap();
    if start {
        jobs.start();
    }
    let app = router(AppState { store: Arc::clone(&store), cfg, jobs: Arc::clone(&jobs) });
    Service { app, jobs, store }
}

impl Service {
    pub async fn send(&self, req: Request<Body>) -> (StatusCode, axum::http::HeaderMap, Vec<u8>) {
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let headers = resp.headers().clone();
        let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
        (status, headers, body)
    }

    pub async fn get(&self, uri: &str) -> (StatusCode, Value) {
        let (s, _, b) = self.send(Request::get(uri).body(Body::empty()).unwrap()).await;
        (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
    }

    pub async fn post_json(&self, uri: &str, body: &str) -> (StatusCode, Value) {
        let req = Request::post(uri)
            .header(header::CONTENT_TYPE, "application/json")
            .body(Body::from(body.to_string()))
            .unwrap();
        let (s, _, b) = self.send(req).await;
        (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
    }

    pub async fn upload(&self, files: &[(&str, Vec<u8>)]) -> (StatusCode, Value) {
        let boundary = "roadatlas-test-boundary";
        let mut body = Vec::new();
        for (name, bytes) in files {
            body.extend_from_slice(
                format!(
                    "--{boundary}\r\nContent-Disposition: form-data; name=\"files\"; filename=\"{name}\"\r\nContent-Type: application/octet-stream\r\n\r\n"
                )
                .as_bytes(),
            );
            body.extend_from_slice(bytes);
            body.extend_from_slice(b"\r\n");
        }
        body.extend_from_slice(format!("--{boundary}--\r\n").as_bytes());
        let req = Request::post("/api/uploads")
            .header(header::CONTENT_TYPE, format!("multipart/form-data; boundary={boundary}"))
            .body(Body::from(body))
            .unwrap();
        let (s, _, b) = self.send(req).await;
        (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
    }

    /// Polls until the job is terminal, checking progress never goes backwards.
    pub async fn wait(&self, job: &str) -> Value {
        let deadline = Instant::now() + Duration::from_secs(60);
        let mut last = (JobState::Queued, 0usize);
        loop {
            let (s, v) = self.get(&format!("/api/jobs/{job}")).await;
            assert_eq!(s, StatusCode::OK);
            let state: JobState = serde_json::from_value(v["state"].clone()).unwrap();
            let done = v["processed"].as_u64().unwrap() as usize + v["failures"].as_array().unwrap().len();
            assert!((state, done) >= last, "job went backwards: {last:?} -> {:?}", (state, done));
            last = (state, done);
            if state.is_terminal() {
                return v;
            }
            assert!(Instant::now() < deadline, "job {job} did not finish");
            std::thread::sleep(Duration::from_millis(20));
        }
    }

    pub fn stop(self) {
        self.jobs.shutdown();
    }
}

pub fn scene_files(seeds: &[u64]) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for &seed in seeds {
        let s = generate_scene(seed);
        out.push((format!("scene_{seed}.png"), super::png(&s.image)));
        out.push((format!("scene_{seed}.geo.json"), serde_json::to_vec(&s.geo).unwrap()));
        out.push((format!("scene_{seed}.pred.png"), super::gray_png(&s.prediction.to_gray_image())));
    }
    out
}

pub fn refs(files: &[(String, Vec<u8>)]) -> Vec<(&str, Vec<u8>)> {
    files.iter().map(|(n, b)| (n.as_str(), b.clone())).collect()
}

pub async fn assert_error(svc: &Service, req: Request<Body>, code: StatusCode, kind: &str) {
    let (s, _, b) = svc.send(req).await;
    assert_eq!(s, code);
    let v: Value = serde_json::from_slice(&b).unwrap();
    assert_eq!(v["error"], kind, "{v}");
    assert!(v["detail"].as_str().is_some_and(|d| !d.is_empty()));
}
