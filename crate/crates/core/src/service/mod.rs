//! HTTP repository and session server.
//!
//! | Route | |
//! |---|---|
//! | `PUT/GET /products/{barcode}` | store or fetch a canonical document |
//! | `GET /products?category=` | list product summaries |
//! | `PUT/GET /media/{name}?kind=` | store or fetch media bytes |
//! | `POST /sessions` | start a session from `{barcode, abilityLevel}` |
//! | `GET /sessions/{id}` | latest snapshot |
//! | `POST /sessions/{id}/actions` | apply a user action |
//! | `POST /sessions/{id}/clock` | advance virtual time by `{dtMillis}` |
//! | `GET /sessions/{id}/stream` | newline-delimited snapshots, one per revision |
//!
//! Errors are JSON bodies of the form `{code, message, diagnostics}`.

mod sessions;
mod store;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;

use crate::dsl::{Diagnostic, MediaKind, ParseError, Severity};
use crate::host::SessionAction;

pub use sessions::{
    SessionConfig, SessionError, SessionSnapshot, Sessions, Slot, HISTORY_LIMIT, MAX_CLOCK_STEP_MILLIS,
};
pub use store::{EntryHeader, ProductSummary, PutOutcome, Store, StoreEntry, StoreError};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub port: u16,
    pub sessions: SessionConfig,
}

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<Store>,
    pub sessions: Arc<Sessions>,
}

impl AppState {
    pub fn open(data_dir: impl Into<PathBuf>, sessions: SessionConfig) -> std::io::Result<Self> {
        Ok(AppState { store: Arc::new(Store::open(data_dir)?), sessions: Arc::new(Sessions::new(sessions)) })
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/products", get(list_products))
        .route("/products/{barcode}", put(put_product).get(get_product))
        .route("/media/{name}", put(put_media).get(get_media))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/actions", post(post_action))
        .route("/sessions/{id}/clock", post(post_clock))
        .route("/sessions/{id}/stream", get(stream_session))
        .with_state(state)
}

/// Binds `config.port` on all interfaces and serves until the process is stopped.
pub async fn serve(config: ServiceConfig) -> std::io::Result<()> {
    let state = AppState::open(&config.data_dir, config.sessions)?;
    let listener = TcpListener::bind(SocketAddr::from(([0, 0, 0, 0], config.port))).await?;
    serve_on(listener, state).await
}

pub async fn serve_on(listener: TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

#[derive(Debug, Serialize)]
pub struct ErrorBody {
    pub code: &'static str,
    pub message: String,
    pub diagnostics: Vec<Diagnostic>,
}

pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, body: ErrorBody { code, message: message.into(), diagnostics: Vec::new() } }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "BadRequest", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

fn parse_diagnostic(e: &ParseError) -> Diagnostic {
    Diagnostic {
        severity: Severity::Error,
        rule: e.code().to_owned(),
        path: e.path().to_owned(),
        message: e.to_string(),
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let message = e.to_string();
        match e {
            StoreError::Parse(p) => ApiError {
                status: StatusCode::BAD_REQUEST,
                body: ErrorBody { code: "ParseFailed", message, diagnostics: vec![parse_diagnostic(&p)] },
            },
            StoreError::Lint(report) => ApiError {
                status: StatusCode::UNPROCESSABLE_ENTITY,
                body: ErrorBody { code: "LintFailed", message, diagnostics: report.diagnostics },
            },
            StoreError::BarcodeMismatch { .. } => ApiError::new(StatusCode::BAD_REQUEST, "BarcodeMismatch", message),
            StoreError::ProductNotFound(_) | StoreError::MediaNotFound(_) => {
                ApiError::new(StatusCode::NOT_FOUND, "NotFound", message)
            }
            StoreError::UnsafeName { .. } => ApiError::new(StatusCode::BAD_REQUEST, "UnsafeName", message),
            StoreError::Corrupt { .. } | StoreError::Io(_) => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "StorageError", message)
            }
        }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let message = e.to_string();
        let (status, code) = match e {
            SessionError::UnknownSession(_) => (StatusCode::NOT_FOUND, "UnknownSession"),
            SessionError::LimitExceeded(_) => (StatusCode::TOO_MANY_REQUESTS, "SessionLimitExceeded"),
            SessionError::Precondition(_) => (StatusCode::CONFLICT, "PreconditionViolated"),
            SessionError::InvalidClockStep(_) => (StatusCode::BAD_REQUEST, "InvalidClockStep"),
            SessionError::UnsupportedAction(_) => (StatusCode::BAD_REQUEST, "BadRequest"),
            SessionError::Lagged { .. } => (StatusCode::GONE, "StreamLagged"),
        };
        ApiError::new(status, code, message)
    }
}

/// Decodes a JSON body, turning any failure into a `BadRequest` error body.
fn json_body<T: for<'de> Deserialize<'de>>(bytes: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(bytes).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

async fn put_product(
    State(s): State<AppState>,
    Path(barcode): Path<String>,
    body: Bytes,
) -> Result<Json<PutOutcome>, ApiError> {
    Ok(Json(s.store.put_product(&barcode, &body)?))
}

async fn get_product(State(s): State<AppState>, Path(barcode): Path<String>) -> Result<Response, ApiError> {
    let entry = s.store.get_product(&barcode)?;
    let mut response = ([(header::CONTENT_TYPE, "application/json")], entry.document).into_response();
    response.headers_mut().insert("x-revision", HeaderValue::from(entry.header.revision));
    Ok(response)
}

#[derive(Deserialize)]
struct CategoryQuery {
    category: Option<String>,
}

async fn list_products(
    State(s): State<AppState>,
    Query(q): Query<CategoryQuery>,
) -> Result<Json<Vec<ProductSummary>>, ApiError> {
    Ok(Json(s.store.list_products(q.category.as_deref())?))
}

#[derive(Deserialize)]
struct KindQuery {
    kind: Option<String>,
}

async fn put_media(
    State(s): State<AppState>,
    Path(name): Path<String>,
    Query(q): Query<KindQuery>,
    body: Bytes,
) -> Result<StatusCode, ApiError> {
    let kind = q.kind.as_deref().ok_or_else(|| ApiError::bad_request("query parameter `kind` is required"))?;
    let kind = MediaKind::parse(kind).ok_or_else(|| ApiError::bad_request(format!("unknown media kind `{kind}`")))?;
    s.store.put_media(&name, kind, &body)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn get_media(State(s): State<AppState>, Path(name): Path<String>) -> Result<Response, ApiError> {
    let (kind, bytes) = s.store.get_media(&name)?;
    Ok((
        [
            (header::CONTENT_TYPE, "application/octet-stream"),
            (header::HeaderName::from_static("x-media-kind"), kind.as_str()),
        ],
        bytes,
    )
        .into_response())
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct CreateSession {
    barcode: String,
    ability_level: u32,
}

async fn create_session(
    State(s): State<AppState>,
    body: Bytes,
) -> Result<(StatusCode, Json<SessionSnapshot>), ApiError> {
    let req: CreateSession = json_body(&body)?;
    let entry = s.store.get_product(&req.barcode)?;
    let (_, snap) = s.sessions.create(&entry.resource, req.ability_level)?;
    Ok((StatusCode::CREATED, Json(snap)))
}

async fn get_session(State(s): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionSnapshot>, ApiError> {
    Ok(Json(s.sessions.get(&id)?.latest().await))
}

async fn post_action(
    State(s): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<SessionSnapshot>, ApiError> {
    let slot = s.sessions.get(&id)?;
    let action: SessionAction = json_body(&body)?;
    Ok(Json(slot.act(&action).await?))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct ClockAdvance {
    dt_millis: u64,
}

async fn post_clock(
    State(s): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<SessionSnapshot>, ApiError> {
    let slot = s.sessions.get(&id)?;
    let req: ClockAdvance = json_body(&body)?;
    Ok(Json(slot.advance(req.dt_millis).await?))
}

#[derive(Deserialize)]
struct StreamQuery {
    from: Option<u64>,
}

/// Streams snapshots from `from` (default: the current revision) onward.
/// A reader too slow to keep up gets a final `StreamLagged` error line.
async fn stream_session(
    State(s): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<StreamQuery>,
) -> Result<Response, ApiError> {
    let slot = s.sessions.get(&id)?;
    let from = match q.from {
        Some(from) => from,
        None => slot.latest().await.revision,
    };
    // Fail up front if the starting point is already gone.
    slot.since(from).await?;
    let rx = slot.subscribe();
    let lines = futures::stream::unfold(Some((slot, rx, from)), |state| async move {
        let (slot, mut rx, next) = state?;
        loop {
            rx.borrow_and_update();
            match slot.since(next).await {
                Ok(batch) if !batch.is_empty() => {
                    let mut chunk = String::new();
                    for snap in &batch {
                        chunk.push_str(snap);
                        chunk.push('\n');
                    }
                    let next = next + batch.len() as u64;
                    return Some((Ok::<_, std::convert::Infallible>(chunk), Some((slot, rx, next))));
                }
                Ok(_) => {}
                Err(e) => {
                    let body = ErrorBody { code: "StreamLagged", message: e.to_string(), diagnostics: Vec::new() };
                    let line = format!("{}\n", serde_json::to_string(&body).expect("error bodies serialize"));
                    return Some((Ok(line), None));
                }
            }
            if slot.is_closed() || rx.changed().await.is_err() {
                return None;
            }
        }
    });
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], Body::from_stream(lines)).into_response())
}
