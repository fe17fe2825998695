//! HTTP/JSON API for the reading client.
//!
//! The server owns the session clock: phase deadlines are computed and
//! enforced here, and the client only renders what the state says.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use genread_core::bundle::{condition_payload, ConditionPayload};
use genread_core::content::QuestionFocus;
use genread_core::experiment::{
    Clock, EventStore, ExperimentError, ExperimentPlan, ExperimentService, GroupAssignment, LoggedEvent, Operator,
    ReadingCondition, SessionEvent, SessionLog, SessionState, STORIES_PER_SESSION,
};
use genread_core::gaze::parse_gaze_csv;
use genread_core::Bundle;
use serde::Serialize;
use thiserror::Error;

/// Gaze uploads of a long session at 90 Hz run to a few megabytes.
pub const GAZE_BODY_LIMIT: usize = 64 * 1024 * 1024;

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("expected {STORIES_PER_SESSION} bundles, got {0}")]
    WrongBundleCount(usize),
    #[error("bundle {0} given twice")]
    DuplicateBundle(String),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error("bind {addr}: {message}")]
    Bind { addr: SocketAddr, message: String },
}

pub struct AppState {
    service: ExperimentService,
    bundles: BTreeMap<String, Arc<Bundle>>,
}

impl AppState {
    /// Builds the plan from exactly four bundles. `fixed` names the story
    /// always read under C1; it defaults to the first bundle given.
    pub fn new(
        bundles: Vec<Bundle>,
        fixed: Option<&str>,
        distraction_problems: usize,
        store: Arc<dyn EventStore>,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, ServerError> {
        if bundles.len() != STORIES_PER_SESSION {
            return Err(ServerError::WrongBundleCount(bundles.len()));
        }
        let fixed = fixed.map(str::to_string).unwrap_or_else(|| bundles[0].id().to_string());
        let mut plan = ExperimentPlan::new(bundles.iter().map(Bundle::plan_story).collect(), &fixed)?;
        plan.distraction_problem_count = distraction_problems;
        let mut map = BTreeMap::new();
        for b in bundles {
            let id = b.id().to_string();
            if map.insert(id.clone(), Arc::new(b)).is_some() {
                return Err(ServerError::DuplicateBundle(id));
            }
        }
        let service = ExperimentService::open(plan, store, clock)?;
        Ok(Self { service, bundles: map })
    }

    pub fn service(&self) -> &ExperimentService {
        &self.service
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/events", post(record_event))
        .route("/sessions/{id}/state", get(session_state))
        .route("/sessions/{id}/log", get(session_log))
        .route("/sessions/{id}/distraction", get(distraction))
        .route("/sessions/{id}/gaze", post(upload_gaze).layer(DefaultBodyLimit::max(GAZE_BODY_LIMIT)))
        .route("/bundles", get(list_bundles))
        .route("/bundles/{id}/condition/{condition}", get(bundle_condition))
        .route("/bundles/{id}/questions", get(bundle_questions))
        .route("/bundles/{id}/images/{artifact}", get(bundle_image))
        .with_state(state)
}

pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> Result<(), ServerError> {
    let bind_err = |e: std::io::Error| ServerError::Bind { addr, message: e.to_string() };
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(bind_err)?;
    log::info!("listening on {}", listener.local_addr().map_err(bind_err)?);
    axum::serve(listener, router(state)).await.map_err(bind_err)
}

// ------------------------------------------------------------------ errors

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
}

impl ApiError {
    fn not_found(kind: &'static str, message: impl Into<String>) -> Self {
        Self { status: StatusCode::NOT_FOUND, kind, message: message.into() }
    }
}

impl From<ExperimentError> for ApiError {
    fn from(e: ExperimentError) -> Self {
        let (status, kind) = match &e {
            ExperimentError::UnknownSession(_) => (StatusCode::NOT_FOUND, "unknown_session"),
            ExperimentError::IllegalTransition { .. } => (StatusCode::CONFLICT, "illegal_transition"),
            ExperimentError::InvalidEvent(_) | ExperimentError::AnswerCountMismatch { .. } => {
                (StatusCode::UNPROCESSABLE_ENTITY, "invalid_event")
            }
            ExperimentError::UnknownGroup(_) => (StatusCode::UNPROCESSABLE_ENTITY, "unknown_group"),
            ExperimentError::InvalidArgument(_) => (StatusCode::BAD_REQUEST, "invalid_argument"),
            ExperimentError::Storage(_) => (StatusCode::INTERNAL_SERVER_ERROR, "storage"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        Self { status, kind, message: e.to_string() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            log::error!("{}: {}", self.kind, self.message);
        }
        (self.status, Json(serde_json::json!({ "error": self.kind, "message": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

// ---------------------------------------------------------------- sessions

#[derive(Serialize)]
pub struct StateResponse {
    pub state: SessionState,
    /// Server clock at response time; deadlines are on the same clock.
    pub server_time_ms: u64,
}

#[derive(Serialize)]
pub struct CreatedResponse {
    pub state: SessionState,
    pub server_time_ms: u64,
    pub groups: Vec<GroupAssignment>,
}

#[derive(Serialize)]
pub struct EventResponse {
    pub event: LoggedEvent,
    pub state: SessionState,
    pub server_time_ms: u64,
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn create_session(State(app): State<Arc<AppState>>) -> ApiResult<CreatedResponse> {
    let state = app.service.create_session()?;
    Ok(Json(CreatedResponse {
        state,
        server_time_ms: app.service.now_ms(),
        groups: app.service.plan().assignments.clone(),
    }))
}

async fn record_event(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<EventResponse> {
    let event: SessionEvent = serde_json::from_slice(&body).map_err(|e| ApiError {
        status: StatusCode::UNPROCESSABLE_ENTITY,
        kind: "invalid_event",
        message: e.to_string(),
    })?;
    let (event, state) = app.service.record_event(&id, event)?;
    Ok(Json(EventResponse { event, state, server_time_ms: app.service.now_ms() }))
}

async fn session_state(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<StateResponse> {
    let state = app.service.state(&id)?;
    Ok(Json(StateResponse { state, server_time_ms: app.service.now_ms() }))
}

async fn session_log(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<SessionLog> {
    Ok(Json(app.service.log(&id)?))
}

/// A distraction problem as shown to the participant, without its answer.
#[derive(Serialize)]
pub struct ProblemView {
    pub index: usize,
    pub left: i64,
    pub op: Operator,
    pub right: i64,
}

async fn distraction(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Vec<ProblemView>> {
    let state = app.service.state(&id)?;
    let problems = state.distraction_problems(app.service.plan()).ok_or_else(|| ApiError {
        status: StatusCode::CONFLICT,
        kind: "illegal_transition",
        message: format!("no distraction task in phase {}", state.phase.label()),
    })?;
    Ok(Json(
        problems
            .iter()
            .enumerate()
            .map(|(index, p)| ProblemView { index, left: p.left, op: p.op, right: p.right })
            .collect(),
    ))
}

#[derive(Serialize)]
pub struct GazeReceipt {
    pub session_id: String,
    pub samples: usize,
    pub valid_samples: usize,
}

async fn upload_gaze(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<GazeReceipt> {
    let points = parse_gaze_csv(body.as_ref()).map_err(|e| ApiError {
        status: StatusCode::UNPROCESSABLE_ENTITY,
        kind: "invalid_gaze",
        message: e.to_string(),
    })?;
    app.service.upload_gaze(&id, &body)?;
    Ok(Json(GazeReceipt {
        session_id: id,
        samples: points.len(),
        valid_samples: points.iter().filter(|p| p.valid).count(),
    }))
}

// ----------------------------------------------------------------- bundles

fn bundle<'a>(app: &'a AppState, id: &str) -> Result<&'a Arc<Bundle>, ApiError> {
    app.bundles.get(id).ok_or_else(|| ApiError::not_found("unknown_bundle", format!("unknown bundle {id}")))
}

#[derive(Serialize)]
pub struct BundleSummary {
    pub bundle_id: String,
    pub title: String,
    pub word_count: usize,
}

async fn list_bundles(State(app): State<Arc<AppState>>) -> Json<Vec<BundleSummary>> {
    Json(
        app.bundles
            .values()
            .map(|b| BundleSummary {
                bundle_id: b.id().to_string(),
                title: b.story.title.clone(),
                word_count: b.story.word_count,
            })
            .collect(),
    )
}

async fn bundle_condition(
    State(app): State<Arc<AppState>>,
    Path((id, condition)): Path<(String, String)>,
) -> ApiResult<ConditionPayload> {
    let b = bundle(&app, &id)?;
    let condition: ReadingCondition = condition.parse().map_err(|_| {
        ApiError::not_found("unknown_condition", format!("unknown condition {condition}; expected C1..C4"))
    })?;
    Ok(Json(condition_payload(b, condition)))
}

/// A post-test question as shown to the participant, without its key.
#[derive(Serialize)]
pub struct QuestionView {
    pub index: u8,
    pub stem: String,
    pub options: Vec<String>,
    pub focus: QuestionFocus,
}

async fn bundle_questions(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Vec<QuestionView>> {
    let b = bundle(&app, &id)?;
    Ok(Json(
        b.questions
            .questions
            .iter()
            .map(|q| QuestionView { index: q.index, stem: q.stem.clone(), options: q.options.clone(), focus: q.focus })
            .collect(),
    ))
}

async fn bundle_image(
    State(app): State<Arc<AppState>>,
    Path((id, artifact)): Path<(String, String)>,
) -> Result<Response, ApiError> {
    let b = bundle(&app, &id)?;
    let art = b
        .artifacts
        .get(&artifact)
        .ok_or_else(|| ApiError::not_found("unknown_image", format!("bundle {id} has no image {artifact}")))?;
    Ok(([(header::CONTENT_TYPE, art.media_type.clone())], art.bytes.clone()).into_response())
}
