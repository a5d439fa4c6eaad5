//! Review service over one finalized run.
//!
//! | Method | Path | Body / query | Response |
//! |---|---|---|---|
//! | GET | `/api/runs` | | `[RunInfo]` |
//! | GET | `/api/runs/{id}/queue` | `model, component, confidence, flagged, include_reviewed, offset, limit` | `QueuePage` |
//! | GET | `/api/runs/{id}/summary` | | `Summary` |
//! | POST | `/api/runs/{id}/reviews` | `ReviewRequest` | 201 `ReviewRecord` |
//! | GET | `/api/runs/{id}/metrics` | `truth=benchmark:<id>\|consensus\|human` | `MetricsReport` |
//!
//! Errors are `{"error": "..."}` with 400 (bad request), 404 (unknown run,
//! model or log) or 422 (illegal verdict or label, no reviewed logs yet).

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{Html, IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use maintbench_core::metrics::{latest_reviews, MetricsError};
use maintbench_core::report::build_report;
use maintbench_core::{
    resolve_labels, ClassificationOutput, Confidence, FailureKind, FailureRecord, GroundTruthSource, LabelPair,
    MaintenanceLog, ModelConfig, ModelResults, ResolvedLabelSet, ReviewRecord, Task, Verdict,
};
use serde::{Deserialize, Serialize};

use crate::archive::{Archive, ReviewLog, RunStatus};
use crate::config::Config;
use crate::error::{Error, Result};

const PLACEHOLDER_INDEX: &str = "<!doctype html>
<html><head><meta charset=\"utf-8\"><title>maintbench review</title></head>
<body><h1>maintbench review service</h1>
<p>The review UI is not installed. The REST API is available under <code>/api/runs</code>.</p>
</body></html>
";

pub struct RunView {
    pub run_id: String,
    pub created_at: String,
    pub config: Config,
    pub logs: BTreeMap<String, MaintenanceLog>,
    pub models: Vec<ModelResults>,
    pub configs: Vec<ModelConfig>,
    pub labels: BTreeMap<String, ResolvedLabelSet>,
}

pub struct AppState {
    pub run: RunView,
    reviews: Mutex<ReviewLog>,
}

impl AppState {
    pub fn load(run_dir: &Path) -> Result<Arc<AppState>> {
        let archive = Archive::open(run_dir)?;
        if archive.manifest.status != RunStatus::Finalized {
            return Err(Error::Usage(format!("run {} is not finalized", archive.run_id())));
        }
        let config = archive.config()?;
        let logs: BTreeMap<_, _> = archive.dataset()?.into_iter().map(|l| (l.log_id.clone(), l)).collect();
        let mut labels = BTreeMap::new();
        for l in logs.values() {
            if !labels.contains_key(&l.component_code) {
                labels.insert(
                    l.component_code.clone(),
                    resolve_labels(&l.component_code, &config.label_map, &config.schema)?,
                );
            }
        }
        let configs = archive.manifest.models.iter().filter_map(|id| config.model(id).cloned()).collect();
        let run = RunView {
            run_id: archive.run_id().to_string(),
            created_at: archive.manifest.created_at.clone(),
            models: archive.model_results()?,
            config,
            logs,
            configs,
            labels,
        };
        let reviews = Mutex::new(ReviewLog::open(&archive.reviews_path())?);
        Ok(Arc::new(AppState { run, reviews }))
    }

    fn reviews(&self) -> Vec<ReviewRecord> {
        self.reviews.lock().expect("review log").records().to_vec()
    }
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

fn not_found(what: impl Into<String>) -> ApiError {
    ApiError(StatusCode::NOT_FOUND, what.into())
}

fn unprocessable(what: impl Into<String>) -> ApiError {
    ApiError(StatusCode::UNPROCESSABLE_ENTITY, what.into())
}

fn check_run(state: &AppState, id: &str) -> ApiResult<()> {
    if id == state.run.run_id {
        Ok(())
    } else {
        Err(not_found(format!("unknown run {id:?}")))
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunInfo {
    pub run_id: String,
    pub created_at: String,
    pub n_logs: usize,
    pub models: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueueItem {
    pub log: MaintenanceLog,
    pub model_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<ClassificationOutput>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<FailureRecord>,
    /// Legal labels for corrections.
    pub labels: ResolvedLabelSet,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub review: Option<ReviewRecord>,
    /// Set for out-of-set label failures.
    pub flagged: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct QueuePage {
    pub run_id: String,
    pub total: usize,
    pub offset: usize,
    pub limit: usize,
    pub items: Vec<QueueItem>,
}

#[derive(Debug, Default, Deserialize)]
pub struct QueueQuery {
    pub model: Option<String>,
    pub component: Option<String>,
    pub confidence: Option<Confidence>,
    pub flagged: Option<bool>,
    #[serde(default)]
    pub include_reviewed: bool,
    #[serde(default)]
    pub offset: usize,
    pub limit: Option<usize>,
}

pub const DEFAULT_PAGE: usize = 50;
pub const MAX_PAGE: usize = 1000;

/// Reviewable items: valid outputs and out-of-set label failures.
fn queue_items(state: &AppState, reviews: &[ReviewRecord]) -> Vec<QueueItem> {
    let latest = latest_reviews(reviews);
    let mut items = Vec::new();
    for m in &state.run.models {
        for e in &m.entries {
            let flagged = e.outcome.failure().is_some_and(|f| f.kind == FailureKind::LabelOutOfSet);
            if e.outcome.output().is_none() && !flagged {
                continue;
            }
            let Some(log) = state.run.logs.get(&e.log_id) else { continue };
            items.push(QueueItem {
                log: log.clone(),
                model_id: m.model_id.clone(),
                output: e.outcome.output().cloned(),
                failure: e.outcome.failure().cloned(),
                labels: state.run.labels[&log.component_code].clone(),
                review: latest.get(&(m.model_id.as_str(), e.log_id.as_str())).map(|(_, r)| (*r).clone()),
                flagged,
            });
        }
    }
    // stable: flagged first, then ascending confidence, then model and log order
    items.sort_by_key(|i| (!i.flagged, i.output.as_ref().map(|o| o.confidence)));
    items
}

pub fn filter_queue(items: Vec<QueueItem>, q: &QueueQuery) -> Vec<QueueItem> {
    items
        .into_iter()
        .filter(|i| q.model.as_ref().is_none_or(|m| &i.model_id == m))
        .filter(|i| q.component.as_ref().is_none_or(|c| &i.log.component_code == c))
        .filter(|i| q.confidence.is_none_or(|c| i.output.as_ref().is_some_and(|o| o.confidence == c)))
        .filter(|i| q.flagged.is_none_or(|f| i.flagged == f))
        .filter(|i| q.include_reviewed || i.review.is_none())
        .collect()
}

async fn list_runs(State(state): State<Arc<AppState>>) -> Json<Vec<RunInfo>> {
    Json(vec![RunInfo {
        run_id: state.run.run_id.clone(),
        created_at: state.run.created_at.clone(),
        n_logs: state.run.logs.len(),
        models: state.run.models.iter().map(|m| m.model_id.clone()).collect(),
    }])
}

async fn queue(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    query: std::result::Result<Query<QueueQuery>, axum::extract::rejection::QueryRejection>,
) -> ApiResult<Json<QueuePage>> {
    check_run(&state, &id)?;
    let Query(q) = query.map_err(|e| ApiError(StatusCode::BAD_REQUEST, e.body_text()))?;
    if let Some(m) = &q.model {
        if !state.run.models.iter().any(|r| &r.model_id == m) {
            return Err(not_found(format!("unknown model {m:?}")));
        }
    }
    let items = filter_queue(queue_items(&state, &state.reviews()), &q);
    let limit = q.limit.unwrap_or(DEFAULT_PAGE).min(MAX_PAGE);
    let total = items.len();
    let items = items.into_iter().skip(q.offset).take(limit).collect();
    Ok(Json(QueuePage { run_id: id, total, offset: q.offset, limit, items }))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelProgress {
    pub model_id: String,
    pub reviewed: usize,
    pub accepted: usize,
    pub corrected: usize,
    pub hallucination: usize,
    pub remaining: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Summary {
    pub run_id: String,
    pub models: Vec<ModelProgress>,
}

/// Progress per model from the latest verdict per log.
pub fn summarize(state: &AppState, reviews: &[ReviewRecord]) -> Vec<ModelProgress> {
    let latest = latest_reviews(reviews);
    let items = queue_items(state, reviews);
    state
        .run
        .models
        .iter()
        .map(|m| {
            let mut p = ModelProgress {
                model_id: m.model_id.clone(),
                reviewed: 0,
                accepted: 0,
                corrected: 0,
                hallucination: 0,
                remaining: items.iter().filter(|i| i.model_id == m.model_id && i.review.is_none()).count(),
            };
            for ((model, _), (_, r)) in &latest {
                if *model != m.model_id {
                    continue;
                }
                p.reviewed += 1;
                match r.verdict {
                    Verdict::Accepted => p.accepted += 1,
                    Verdict::Corrected => p.corrected += 1,
                    Verdict::Hallucination => p.hallucination += 1,
                }
            }
            p
        })
        .collect()
}

async fn summary(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Summary>> {
    check_run(&state, &id)?;
    let reviews = state.reviews();
    Ok(Json(Summary { run_id: id, models: summarize(&state, &reviews) }))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReviewRequest {
    pub model_id: String,
    pub log_id: String,
    pub verdict: Verdict,
    #[serde(default)]
    pub corrected_labels: Option<LabelPair>,
    #[serde(default)]
    pub reviewer: Option<String>,
}

/// Checks a verdict against the archive and the log's legal labels.
fn check_review(run: &RunView, req: &ReviewRequest) -> ApiResult<()> {
    let model = run
        .models
        .iter()
        .find(|m| m.model_id == req.model_id)
        .ok_or_else(|| not_found(format!("unknown model {:?}", req.model_id)))?;
    let entry = model
        .entries
        .iter()
        .find(|e| e.log_id == req.log_id)
        .ok_or_else(|| not_found(format!("unknown log {:?}", req.log_id)))?;
    let log = &run.logs[&req.log_id];
    let legal = &run.labels[&log.component_code];
    match (req.verdict, &req.corrected_labels) {
        (Verdict::Corrected, None) => Err(unprocessable("a corrected verdict needs corrected_labels")),
        (Verdict::Corrected, Some(pair)) => {
            for task in Task::ALL {
                let label = pair.label(task);
                if !legal.contains(task, label) {
                    return Err(unprocessable(format!(
                        "label {label:?} is not a legal {task} for component {}",
                        log.component_code
                    )));
                }
            }
            Ok(())
        }
        (_, Some(_)) => Err(unprocessable("corrected_labels are only allowed with verdict \"corrected\"")),
        (Verdict::Accepted, None) if entry.outcome.output().is_none() => {
            Err(unprocessable("nothing to accept: the model produced no valid output for this log"))
        }
        _ => Ok(()),
    }
}

async fn post_review(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: std::result::Result<Json<ReviewRequest>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<ReviewRecord>)> {
    check_run(&state, &id)?;
    let Json(req) = body.map_err(|e| ApiError(StatusCode::BAD_REQUEST, e.body_text()))?;
    check_review(&state.run, &req)?;
    let record = ReviewRecord {
        run_id: id,
        model_id: req.model_id,
        log_id: req.log_id,
        verdict: req.verdict,
        corrected_labels: req.corrected_labels,
        reviewer: req.reviewer.filter(|r| !r.is_empty()).unwrap_or_else(|| "anonymous".into()),
        reviewed_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
    };
    state
        .reviews
        .lock()
        .expect("review log")
        .append(record.clone())
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    Ok((StatusCode::CREATED, Json(record)))
}

#[derive(Debug, Deserialize)]
struct MetricsQuery {
    truth: Option<String>,
}

async fn metrics(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<MetricsQuery>,
) -> ApiResult<Response> {
    check_run(&state, &id)?;
    let source: GroundTruthSource =
        q.truth.as_deref().unwrap_or("human").parse().map_err(|e: String| ApiError(StatusCode::BAD_REQUEST, e))?;
    let reviews = state.reviews();
    let run = &state.run;
    match build_report(&run.models, &run.configs, &run.config.schema, &reviews, &source) {
        Ok(r) => Ok(Json(r).into_response()),
        Err(e @ (MetricsError::NoReviews | MetricsError::UnknownModel(_))) => Err(unprocessable(e.to_string())),
        Err(e) => Err(ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())),
    }
}

pub fn router(state: Arc<AppState>, assets: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/runs", get(list_runs))
        .route("/api/runs/{id}/queue", get(queue))
        .route("/api/runs/{id}/summary", get(summary))
        .route("/api/runs/{id}/reviews", axum::routing::post(post_review))
        .route("/api/runs/{id}/metrics", get(metrics))
        .with_state(state);
    match assets.filter(|p| p.join("index.html").is_file()) {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api.route("/", get(|| async { Html(PLACEHOLDER_INDEX) })),
    }
}

/// Binds and serves until the process is stopped.
pub async fn serve(run_dir: &Path, port: u16, assets: Option<PathBuf>) -> Result<()> {
    let state = AppState::load(run_dir)?;
    let run_id = state.run.run_id.clone();
    let addr = SocketAddr::from(([127, 0, 0, 1], port));
    let listener =
        tokio::net::TcpListener::bind(addr).await.map_err(|e| Error::Runtime(format!("cannot bind {addr}: {e}")))?;
    let local = listener.local_addr().map_err(|e| Error::Runtime(e.to_string()))?;
    println!("{}", run_dir.join(crate::archive::REVIEWS).display());
    println!("serving run {run_id} at http://{local}/");
    axum::serve(listener, router(state, assets)).await.map_err(|e| Error::Runtime(e.to_string()))
}
