//! HTTP API for interactive labeling sessions.
//!
//! Sessions live in memory. Each one wraps an [`activecorr::sampler::Session`]
//! behind its own mutex, so submissions to one session are serialized while
//! different sessions proceed independently.

use std::collections::HashMap;
use std::hash::{BuildHasher, RandomState};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use activecorr::binning::{build_pair_graph, BinConfig, BinSpec};
use activecorr::catalog::{load_catalog, Catalog};
use activecorr::estimators::EdgeScoreModel;
use activecorr::sampler::Session;
use activecorr::variance::{variance_report, VarianceReport};
use activecorr::{Execution, VertexId};
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

mod live;

pub use live::{BinStatus, Estimator, HistoryPoint, LiveSession, SessionOptions, Status};

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("{0}")]
    NotFound(String),
    #[error("{message}")]
    BadRequest { field: Option<String>, message: String },
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Internal(String),
}

impl ApiError {
    fn bad(field: &str, message: impl Into<String>) -> Self {
        ApiError::BadRequest {
            field: Some(field.to_string()),
            message: message.into(),
        }
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    field: Option<&'a str>,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self {
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::BadRequest { .. } => StatusCode::BAD_REQUEST,
            ApiError::Conflict(_) => StatusCode::CONFLICT,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let field = match &self {
            ApiError::BadRequest { field, .. } => field.as_deref(),
            _ => None,
        };
        let body = ErrorBody {
            error: self.to_string(),
            field,
        };
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Shared server state: the catalog directory and live sessions.
#[derive(Debug)]
pub struct AppState {
    catalog_dir: PathBuf,
    sessions: RwLock<HashMap<String, Arc<Mutex<LiveSession>>>>,
    counter: AtomicU64,
    ids: RandomState,
}

impl AppState {
    pub fn new(catalog_dir: impl Into<PathBuf>) -> Self {
        AppState {
            catalog_dir: catalog_dir.into(),
            sessions: RwLock::new(HashMap::new()),
            counter: AtomicU64::new(0),
            ids: RandomState::new(),
        }
    }

    fn next_id(&self) -> String {
        let n = self.counter.fetch_add(1, Ordering::Relaxed);
        format!("{n}-{:016x}", self.ids.hash_one(n))
    }

    fn session(&self, id: &str) -> ApiResult<Arc<Mutex<LiveSession>>> {
        self.sessions
            .read()
            .map_err(|_| ApiError::Internal("session table poisoned".into()))?
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(format!("unknown session {id}")))
    }

    fn catalog_path(&self, name: &str) -> ApiResult<PathBuf> {
        let p = Path::new(name);
        let plain = p.components().count() == 1 && p.file_name().is_some_and(|f| f == p.as_os_str());
        if !plain {
            return Err(ApiError::bad("catalog", "catalog must be a file name inside the catalog directory"));
        }
        let path = self.catalog_dir.join(p);
        if !path.is_file() {
            return Err(ApiError::NotFound(format!("unknown catalog {name}")));
        }
        Ok(path)
    }
}

fn lock(s: &Mutex<LiveSession>) -> ApiResult<std::sync::MutexGuard<'_, LiveSession>> {
    s.lock().map_err(|_| ApiError::Internal("session state poisoned".into()))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/catalogs", get(list_catalogs))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/labels", post(submit_label))
        .route("/sessions/{id}/estimates", get(get_estimates))
        .route("/sessions/{id}/stop", post(stop_session))
        .with_state(state)
}

/// Serve until the process is stopped.
pub async fn serve(addr: SocketAddr, catalog_dir: PathBuf) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(AppState::new(catalog_dir)))).await
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &str) -> ApiResult<T> {
    serde_json::from_str(body).map_err(|e| ApiError::BadRequest {
        field: None,
        message: format!("malformed request: {e}"),
    })
}

async fn list_catalogs(State(state): State<Arc<AppState>>) -> ApiResult<Json<Vec<String>>> {
    let mut names = Vec::new();
    let dir = std::fs::read_dir(&state.catalog_dir).map_err(|e| ApiError::Internal(e.to_string()))?;
    for entry in dir.flatten() {
        if entry.path().is_file() {
            names.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    names.sort();
    Ok(Json(names))
}

/// Body of `POST /sessions`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    /// File name inside the catalog directory.
    pub catalog: String,
    pub bins: BinSpec,
    pub seed: u64,
    #[serde(default)]
    pub options: SessionOptions,
}

fn build_bins(spec: &BinSpec) -> ApiResult<BinConfig> {
    spec.build().map_err(|e| ApiError::bad("bins", e.to_string()))
}

fn open_catalog(path: &Path) -> ApiResult<Catalog> {
    load_catalog(path, false).map_err(|e| ApiError::bad("catalog", e.to_string()))
}

async fn create_session(State(state): State<Arc<AppState>>, body: String) -> ApiResult<(StatusCode, Json<SessionView>)> {
    let req: CreateRequest = parse_body(&body)?;
    req.options.validate().map_err(|(f, m)| ApiError::bad(f, m))?;
    let bins = build_bins(&req.bins)?;
    let path = state.catalog_path(&req.catalog)?;
    let catalog = open_catalog(&path)?;
    let graph = Arc::new(build_pair_graph(&catalog, &bins, Execution::Parallel).map_err(|e| ApiError::Internal(e.to_string()))?);
    let model = Arc::new(req.options.model(&graph, &catalog).map_err(|e| ApiError::bad("options", e.to_string()))?);
    let session = Session::new(graph, model, req.seed).map_err(|e| ApiError::bad("bins", e.to_string()))?;
    let live = LiveSession::new(req.catalog.clone(), catalog, bins, session, req.options);
    let id = state.next_id();
    let view = SessionView::of(&id, &live);
    state
        .sessions
        .write()
        .map_err(|_| ApiError::Internal("session table poisoned".into()))?
        .insert(id, Arc::new(Mutex::new(live)));
    Ok((StatusCode::CREATED, Json(view)))
}

/// A source awaiting its label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingVertex {
    pub id: VertexId,
    pub x: f64,
    pub y: f64,
    pub prob: f64,
}

/// The session resource returned by most endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub catalog: String,
    pub status: Status,
    pub pending: Option<PendingVertex>,
    pub labels_used: usize,
    pub num_sources: usize,
    pub excluded_bins: Vec<usize>,
    pub bins: Vec<BinStatus>,
}

impl SessionView {
    fn of(id: &str, live: &LiveSession) -> Self {
        SessionView {
            id: id.to_string(),
            catalog: live.catalog_name().to_string(),
            status: live.status(),
            pending: live.pending_vertex().map(|v| {
                let p = &live.catalog().points()[v as usize];
                PendingVertex {
                    id: v,
                    x: p.x,
                    y: p.y,
                    prob: p.prob,
                }
            }),
            labels_used: live.session().labels_used(),
            num_sources: live.session().num_vertices(),
            excluded_bins: live.session().excluded_bins().to_vec(),
            bins: live.bin_status(),
        }
    }
}

async fn get_session(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<SessionView>> {
    let s = state.session(&id)?;
    let live = lock(&s)?;
    Ok(Json(SessionView::of(&id, &live)))
}

/// Body of `POST /sessions/{id}/labels`. `label` is 0 or 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelRequest {
    pub vertex: VertexId,
    pub label: u8,
}

async fn submit_label(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: String,
) -> ApiResult<Json<SessionView>> {
    let req: LabelRequest = parse_body(&body)?;
    let label = match req.label {
        0 => false,
        1 => true,
        other => return Err(ApiError::bad("label", format!("label must be 0 or 1, got {other}"))),
    };
    let s = state.session(&id)?;
    let mut live = lock(&s)?;
    live.submit(req.vertex, label)?;
    Ok(Json(SessionView::of(&id, &live)))
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct HistoryQuery {
    /// First step to include.
    #[serde(default)]
    pub from: usize,
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinHistory {
    pub bin: usize,
    pub points: Vec<HistoryPoint>,
}

/// Estimate history for steps `from..to`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatesView {
    pub id: String,
    pub from: usize,
    pub to: usize,
    /// Total number of steps so far.
    pub steps: usize,
    pub bins: Vec<BinHistory>,
}

async fn get_estimates(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<HistoryQuery>,
) -> ApiResult<Json<EstimatesView>> {
    let s = state.session(&id)?;
    let live = lock(&s)?;
    let steps = live.session().events().len();
    let from = q.from.min(steps);
    let to = q.limit.map_or(steps, |l| from.saturating_add(l).min(steps));
    let bins = live
        .history()
        .iter()
        .map(|(&bin, points)| BinHistory {
            bin,
            points: points.iter().filter(|p| (from..to).contains(&p.step)).cloned().collect(),
        })
        .collect();
    Ok(Json(EstimatesView {
        id,
        from,
        to,
        steps,
        bins,
    }))
}

/// Response of `POST /sessions/{id}/stop`: the frozen session and the
/// final variance report of every bin with enough labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopView {
    pub session: SessionView,
    pub reports: Vec<VarianceReport>,
}

async fn stop_session(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<StopView>> {
    let s = state.session(&id)?;
    let mut live = lock(&s)?;
    live.stop();
    let session = live.session();
    let mut reports = Vec::new();
    for t in session.tracks().iter().filter(|t| t.state.k() >= 4) {
        let r = variance_report(
            &t.state,
            session.labels(),
            session.graph(),
            session.model(),
            session.labels_used(),
            live.options().level,
            Execution::Parallel,
        )
        .map_err(|e| ApiError::Internal(e.to_string()))?;
        reports.push(r);
    }
    Ok(Json(StopView {
        session: SessionView::of(&id, &live),
        reports,
    }))
}

impl SessionOptions {
    fn model(&self, graph: &activecorr::binning::BinnedPairGraph, catalog: &Catalog) -> activecorr::Result<EdgeScoreModel> {
        match self.estimator {
            Estimator::Is => EdgeScoreModel::product(graph, catalog.probs()),
            Estimator::Mc => EdgeScoreModel::uniform(graph, 1.0),
        }
    }
}
