//! Asynchronous summary jobs over HTTP, for the web UI.
//!
//! ```text
//! GET  /catalog                       proxied from the origin
//! POST /summaries                     {"video_id", "events": [...], "threshold"?, "pad_segments"?}
//! GET  /summaries/{job}               state, phase, timings, plan stats
//! GET  /summaries/{job}/playlist.m3u8
//! GET  /summaries/{job}/segments/{name}
//! GET  /                              static UI files, when configured
//! ```
//!
//! Jobs live in memory. Identical requests share one job unless it failed.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::Semaphore;

use super::{summarize, OriginClient, Phase, StepTimings, SummaryRequest, SummaryResult, SummaryStatus};
use super::{SUMMARY_PLAYLIST, SUMMARY_STREAM};
use crate::detector::{validate_threshold, ScoreBackend};
use crate::error::{Error, Result};
use crate::server::{file_response, safe_relative, spawn_service, ServiceHandle};

pub struct JobApiConfig {
    pub origin: OriginClient,
    pub backend: Arc<dyn ScoreBackend>,
    /// Each job writes into its own subdirectory.
    pub work_dir: PathBuf,
    /// Jobs allowed to run at once.
    pub workers: usize,
    pub emit_concatenated: bool,
    pub ui_dir: Option<PathBuf>,
}

impl JobApiConfig {
    pub fn new(origin: OriginClient, backend: Arc<dyn ScoreBackend>, work_dir: impl Into<PathBuf>) -> Self {
        Self {
            origin,
            backend,
            work_dir: work_dir.into(),
            workers: 2,
            emit_concatenated: true,
            ui_dir: None,
        }
    }
}

/// Body of `POST /summaries`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct JobRequest {
    pub video_id: String,
    pub events: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pad_segments: Option<usize>,
}

impl JobRequest {
    fn key(&self) -> u64 {
        let mut events = self.events.clone();
        events.sort();
        events.dedup();
        let mut h = DefaultHasher::new();
        self.video_id.hash(&mut h);
        events.hash(&mut h);
        self.threshold.map(f64::to_bits).hash(&mut h);
        self.pad_segments.unwrap_or(0).hash(&mut h);
        h.finish()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

fn field_error(field: &str, message: impl Into<String>) -> FieldError {
    FieldError {
        field: field.into(),
        message: message.into(),
    }
}

/// Structural checks that need no origin round trip.
pub fn check_job_request(body: &[u8]) -> std::result::Result<JobRequest, Vec<FieldError>> {
    let value: Value = serde_json::from_slice(body).map_err(|e| vec![field_error("body", e.to_string())])?;
    let Some(obj) = value.as_object() else {
        return Err(vec![field_error("body", "expected a JSON object")]);
    };
    let mut errors = Vec::new();
    let mut req = JobRequest::default();
    match obj.get("video_id") {
        Some(Value::String(s)) if !s.trim().is_empty() => req.video_id = s.clone(),
        Some(Value::String(_)) => errors.push(field_error("video_id", "must not be empty")),
        Some(_) => errors.push(field_error("video_id", "must be a string")),
        None => errors.push(field_error("video_id", "is required")),
    }
    match obj.get("events") {
        Some(Value::Array(items)) => {
            if items.is_empty() {
                errors.push(field_error("events", "select at least one event"));
            }
            for item in items {
                match item.as_str() {
                    Some(s) if !s.is_empty() => req.events.push(s.to_string()),
                    _ => errors.push(field_error("events", "entries must be non-empty strings")),
                }
            }
        }
        Some(_) => errors.push(field_error("events", "must be an array of strings")),
        None => errors.push(field_error("events", "is required")),
    }
    match obj.get("threshold") {
        None | Some(Value::Null) => {}
        Some(v) => match v.as_f64() {
            Some(t) if validate_threshold(t).is_ok() => req.threshold = Some(t),
            _ => errors.push(field_error("threshold", "must be a number in (0, 1]")),
        },
    }
    match obj.get("pad_segments") {
        None | Some(Value::Null) => {}
        Some(v) => match v.as_u64() {
            Some(p) => req.pad_segments = Some(p as usize),
            None => errors.push(field_error("pad_segments", "must be a non-negative integer")),
        },
    }
    if errors.is_empty() {
        Ok(req)
    } else {
        Err(errors)
    }
}

#[derive(Debug, Clone)]
enum JobState {
    Queued,
    Running(Phase),
    Done(Box<SummaryResult>),
    Failed(String),
}

#[derive(Debug, Clone)]
struct Job {
    request: JobRequest,
    state: JobState,
}

/// What `GET /summaries/{job}` returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobView {
    pub job_id: String,
    pub video_id: String,
    pub events: Vec<String>,
    pub state: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<SummaryStatus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<StepTimings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<PlanStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub playlist_url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stream_url: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanStats {
    pub thumbnails: u64,
    pub detections: usize,
    pub segments: usize,
    pub runs: usize,
    pub estimated_duration: f64,
    pub segment_indices: Vec<usize>,
}

impl JobView {
    fn of(id: &str, job: &Job) -> Self {
        let mut view = JobView {
            job_id: id.to_string(),
            video_id: job.request.video_id.clone(),
            events: job.request.events.clone(),
            state: String::new(),
            phase: None,
            error: None,
            status: None,
            timings: None,
            plan: None,
            playlist_url: None,
            stream_url: None,
        };
        match &job.state {
            JobState::Queued => view.state = "queued".into(),
            JobState::Running(p) => {
                view.state = "running".into();
                view.phase = Some(p.as_str().into());
            }
            JobState::Failed(e) => {
                view.state = "failed".into();
                view.error = Some(e.clone());
            }
            JobState::Done(r) => {
                view.state = "done".into();
                view.status = Some(r.status);
                view.timings = Some(r.timings);
                view.plan = Some(PlanStats {
                    thumbnails: r.thumbnails_processed,
                    detections: r.detections,
                    segments: r.plan.segment_indices.len(),
                    runs: r.plan.runs.len(),
                    estimated_duration: r.plan.estimated_duration,
                    segment_indices: r.plan.segment_indices.clone(),
                });
                if r.playlist_path.is_some() {
                    view.playlist_url = Some(format!("/summaries/{id}/{SUMMARY_PLAYLIST}"));
                }
                if r.concatenated_path.is_some() {
                    view.stream_url = Some(format!("/summaries/{id}/{SUMMARY_STREAM}"));
                }
            }
        }
        view
    }
}

struct Inner {
    config: JobApiConfig,
    jobs: Mutex<HashMap<String, Job>>,
    by_key: Mutex<HashMap<u64, String>>,
    slots: Arc<Semaphore>,
}

impl Inner {
    fn set_state(&self, id: &str, state: JobState) {
        if let Some(job) = self.jobs.lock().expect("job table").get_mut(id) {
            job.state = state;
        }
    }
}

type Shared = Arc<Inner>;

pub fn router(config: JobApiConfig) -> Router {
    let ui_dir = config.ui_dir.clone();
    let slots = Arc::new(Semaphore::new(config.workers.max(1)));
    let state: Shared = Arc::new(Inner {
        config,
        jobs: Mutex::new(HashMap::new()),
        by_key: Mutex::new(HashMap::new()),
        slots,
    });
    let mut r = Router::new()
        .route("/catalog", get(catalog))
        .route("/summaries", post(create_job))
        .route("/summaries/{job}", get(job_status))
        .route("/summaries/{job}/{*path}", get(job_file));
    if let Some(dir) = ui_dir {
        let dir = Arc::new(dir);
        r = r.fallback(move |uri: axum::http::Uri| {
            let dir = dir.clone();
            async move {
                let raw = uri.path().trim_start_matches('/');
                let rel = if raw.is_empty() { "index.html" } else { raw };
                match safe_relative(rel) {
                    Some(rel) => file_response(&dir.join(rel)).await,
                    None => StatusCode::FORBIDDEN.into_response(),
                }
            }
        });
    }
    r.with_state(state)
}

/// Start the job service on `bind_addr`.
pub async fn job_api(config: JobApiConfig, bind_addr: &str) -> Result<ServiceHandle> {
    std::fs::create_dir_all(&config.work_dir).map_err(|e| Error::io(&config.work_dir, e))?;
    spawn_service(bind_addr, router(config)).await
}

async fn catalog(State(inner): State<Shared>) -> Response {
    match inner.config.origin.catalog().await {
        Ok(c) => Json(c).into_response(),
        Err(e) => origin_unavailable(e),
    }
}

fn origin_unavailable(e: Error) -> Response {
    (StatusCode::BAD_GATEWAY, Json(json!({ "error": e.to_string() }))).into_response()
}

fn bad_request(errors: Vec<FieldError>) -> Response {
    (StatusCode::BAD_REQUEST, Json(json!({ "errors": errors }))).into_response()
}

async fn create_job(State(inner): State<Shared>, body: Bytes) -> Response {
    let req = match check_job_request(&body) {
        Ok(r) => r,
        Err(errors) => return bad_request(errors),
    };
    let origin = &inner.config.origin;
    let listed = match origin.catalog().await {
        Ok(c) => c.contains(&req.video_id),
        Err(e) => return origin_unavailable(e),
    };
    if !listed {
        return bad_request(vec![field_error("video_id", format!("unknown title {:?}", req.video_id))]);
    }
    let manifest = match origin.manifest(&req.video_id).await {
        Ok(m) => m,
        Err(e) => return origin_unavailable(e),
    };
    let unknown: Vec<&str> = req
        .events
        .iter()
        .filter(|e| !manifest.event_vocabulary.contains(e))
        .map(String::as_str)
        .collect();
    if !unknown.is_empty() {
        return bad_request(vec![field_error(
            "events",
            format!(
                "not in the vocabulary of {}: {}; available: {}",
                req.video_id,
                unknown.join(", "),
                manifest.event_vocabulary.join(", ")
            ),
        )]);
    }

    let key = req.key();
    let (id, fresh) = {
        let mut by_key = inner.by_key.lock().expect("key table");
        let mut jobs = inner.jobs.lock().expect("job table");
        let reusable = by_key
            .get(&key)
            .filter(|id| jobs.get(*id).is_some_and(|j| !matches!(j.state, JobState::Failed(_))))
            .cloned();
        match reusable {
            Some(id) => (id, false),
            None => {
                let id = uuid::Uuid::new_v4().simple().to_string();
                jobs.insert(
                    id.clone(),
                    Job {
                        request: req.clone(),
                        state: JobState::Queued,
                    },
                );
                by_key.insert(key, id.clone());
                (id, true)
            }
        }
    };
    if fresh {
        tokio::spawn(run_job(inner.clone(), id.clone(), req));
    }
    (
        StatusCode::ACCEPTED,
        Json(json!({ "job_id": id, "status_url": format!("/summaries/{id}") })),
    )
        .into_response()
}

async fn run_job(inner: Shared, id: String, req: JobRequest) {
    let Ok(_permit) = inner.slots.clone().acquire_owned().await else {
        return;
    };
    inner.set_state(&id, JobState::Running(Phase::Extract));
    let request = SummaryRequest {
        video_id: req.video_id.clone(),
        preferred_events: req.events.clone(),
        threshold_override: req.threshold,
        pad_segments: req.pad_segments.unwrap_or(0),
        output_dir: inner.config.work_dir.join(&id),
        emit_concatenated: inner.config.emit_concatenated,
        remux: false,
    };
    let progress = {
        let inner = inner.clone();
        let id = id.clone();
        move |p: Phase| inner.set_state(&id, JobState::Running(p))
    };
    let outcome = summarize(&request, &inner.config.origin, inner.config.backend.clone(), &progress).await;
    match outcome {
        Ok(r) => inner.set_state(&id, JobState::Done(Box::new(r))),
        Err(e) => {
            tracing::warn!("job {id} failed: {e}");
            inner.set_state(&id, JobState::Failed(e.to_string()));
        }
    }
}

async fn job_status(State(inner): State<Shared>, UrlPath(id): UrlPath<String>) -> Response {
    let jobs = inner.jobs.lock().expect("job table");
    match jobs.get(&id) {
        Some(job) => Json(JobView::of(&id, job)).into_response(),
        None => StatusCode::NOT_FOUND.into_response(),
    }
}

async fn job_file(State(inner): State<Shared>, UrlPath((id, path)): UrlPath<(String, String)>) -> Response {
    let Some(rel) = safe_relative(&path) else {
        return StatusCode::FORBIDDEN.into_response();
    };
    let done = {
        let jobs = inner.jobs.lock().expect("job table");
        match jobs.get(&id) {
            None => return StatusCode::NOT_FOUND.into_response(),
            Some(job) => matches!(job.state, JobState::Done(_)),
        }
    };
    if !done {
        return (StatusCode::CONFLICT, Json(json!({ "error": "job not finished" }))).into_response();
    }
    file_response(&inner.config.work_dir.join(&id).join(rel)).await
}

#[cfg(test)]
mod tests {
    use super::*;

    fn errs(body: &str) -> Vec<String> {
        check_job_request(body.as_bytes())
            .unwrap_err()
            .into_iter()
            .map(|e| e.field)
            .collect()
    }

    #[test]
    fn accepts_minimal_body() {
        let r = check_job_request(br#"{"video_id":"w1","events":["punch"]}"#).unwrap();
        assert_eq!(r.video_id, "w1");
        assert_eq!(r.events, vec!["punch"]);
        assert_eq!((r.threshold, r.pad_segments), (None, None));
    }

    #[test]
    fn field_errors() {
        assert_eq!(errs(r#"{"video_id":"w1","events":[]}"#), vec!["events"]);
        assert_eq!(errs(r#"{"events":["a"]}"#), vec!["video_id"]);
        assert_eq!(errs(r#"{"video_id":"w","events":["a"],"threshold":1.5}"#), vec!["threshold"]);
        assert_eq!(errs(r#"{"video_id":"w","events":["a"],"pad_segments":-1}"#), vec!["pad_segments"]);
        assert_eq!(errs("not json"), vec!["body"]);
        assert_eq!(errs("[]"), vec!["body"]);
        assert_eq!(errs("{}"), vec!["video_id", "events"]);
    }

    #[test]
    fn dedup_key_ignores_event_order() {
        let a = JobRequest {
            video_id: "v".into(),
            events: vec!["x".into(), "y".into()],
            ..Default::default()
        };
        let b = JobRequest {
            events: vec!["y".into(), "x".into()],
            ..a.clone()
        };
        assert_eq!(a.key(), b.key());
        let c = JobRequest {
            pad_segments: Some(1),
            ..a.clone()
        };
        assert_ne!(a.key(), c.key());
    }
}
