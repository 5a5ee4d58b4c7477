//! HTTP session service: REST endpoints plus a server-sent event stream.
//!
//! Each session sits behind its own async mutex. Mutations take it with
//! `try_lock`, so a second concurrent writer is refused with 409 instead of
//! queueing. New events are broadcast while the lock is still held, which is
//! what lets a subscriber splice history and live events without gaps.

use std::collections::HashMap;
use std::convert::Infallible;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Weak};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderMap, HeaderValue, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream, StreamExt};
use gridplan_core::orchestrator::{Phase, PlanningSession, SessionError, SessionEvent};
use gridplan_core::GridMap;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::{broadcast, Mutex, RwLock};

use crate::mapio::{self, MapInfo};
use crate::setup::{self, AdvisorChoice, LlmSettings, SetupError};
use crate::wire::{WireSession, WireVerdict};

#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    /// Origin allowed to call the API from a browser.
    pub ui_origin: Option<String>,
    /// When set, every request must carry `Authorization: Bearer <token>`.
    pub token: Option<String>,
    pub llm: LlmSettings,
    /// Maps offered by `GET /maps` and accepted as `map_name`.
    pub maps: Vec<GridMap>,
}

impl ServiceConfig {
    pub fn with_catalogue() -> Self {
        Self { maps: mapio::catalogue(), ..Self::default() }
    }
}

const EVENT_BUFFER: usize = 1024;

struct Entry {
    session: Arc<Mutex<PlanningSession>>,
    tx: broadcast::Sender<SessionEvent>,
}

struct AppState {
    config: ServiceConfig,
    sessions: RwLock<HashMap<String, Arc<Entry>>>,
    next_id: AtomicU64,
}

#[derive(Debug)]
pub enum ApiError {
    NotFound(String),
    Conflict(String),
    BadRequest(String),
    Unprocessable(String),
    Unauthorized,
    BadGateway(String),
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, msg) = match self {
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, m),
            ApiError::Conflict(m) => (StatusCode::CONFLICT, m),
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, m),
            ApiError::Unprocessable(m) => (StatusCode::UNPROCESSABLE_ENTITY, m),
            ApiError::Unauthorized => (StatusCode::UNAUTHORIZED, "missing or wrong bearer token".into()),
            ApiError::BadGateway(m) => (StatusCode::BAD_GATEWAY, m),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, m),
        };
        (status, Json(json!({ "error": msg }))).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::WrongPhase(_) => ApiError::Conflict(e.to_string()),
            SessionError::UnknownCandidate(_) => ApiError::BadRequest(e.to_string()),
            SessionError::IncompatibleConfig(_) => ApiError::Unprocessable(e.to_string()),
            SessionError::Advisor(_) => ApiError::BadGateway(e.to_string()),
            other => ApiError::Internal(other.to_string()),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::BadRequest(r.body_text())
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateRequest {
    pub map_name: Option<String>,
    pub map_text: Option<String>,
    pub planner: String,
    pub advisor: Option<String>,
    pub autopilot: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepRequest {
    pub count: i64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerdictRequest {
    pub verdicts: Vec<WireVerdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResponse {
    pub events: Vec<SessionEvent>,
    pub seq: u64,
    pub phase: Phase,
    /// Set when an advisor error interrupted the batch; the session may retry.
    pub advisor_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictResponse {
    pub event: SessionEvent,
    pub seq: u64,
    pub phase: Phase,
}

#[derive(Debug, Deserialize)]
pub struct StreamQuery {
    pub after: Option<u64>,
}

impl AppState {
    async fn entry(&self, id: &str) -> ApiResult<Arc<Entry>> {
        self.sessions.read().await.get(id).cloned().ok_or_else(|| ApiError::NotFound(format!("no session {id:?}")))
    }
}

fn busy() -> ApiError {
    ApiError::Conflict("another request is mutating this session".into())
}

async fn create_session(
    State(st): State<Arc<AppState>>,
    body: Result<Json<CreateRequest>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<WireSession>)> {
    let Json(req) = body?;
    let map = match (&req.map_name, &req.map_text) {
        (Some(_), Some(_)) => return Err(ApiError::BadRequest("give map_name or map_text, not both".into())),
        (Some(name), None) => st
            .config
            .maps
            .iter()
            .find(|m| m.name() == name)
            .cloned()
            .ok_or_else(|| ApiError::BadRequest(format!("unknown map {name:?}")))?,
        (None, Some(text)) => GridMap::parse("uploaded", text).map_err(|e| ApiError::BadRequest(e.to_string()))?,
        (None, None) => return Err(ApiError::BadRequest("map_name or map_text is required".into())),
    };
    let planner = setup::parse_planner(&req.planner).map_err(ApiError::BadRequest)?;
    let advisor = match req.advisor.as_deref() {
        None | Some("none") => None,
        Some(a) => Some(a.parse::<AdvisorChoice>().map_err(ApiError::BadRequest)?),
    };
    let id = format!("s{}", st.next_id.fetch_add(1, Ordering::Relaxed) + 1);
    let session = setup::build_session(id.clone(), map, planner, advisor, req.autopilot, &st.config.llm).map_err(
        |e| match e {
            SetupError::AdvisorUnavailable(a) => ApiError::BadGateway(a.to_string()),
            SetupError::Session(s) => s.into(),
        },
    )?;
    let wire = WireSession::from(&session.snapshot());
    let (tx, _) = broadcast::channel(EVENT_BUFFER);
    st.sessions.write().await.insert(id, Arc::new(Entry { session: Arc::new(Mutex::new(session)), tx }));
    Ok((StatusCode::CREATED, Json(wire)))
}

async fn get_session(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<WireSession>> {
    let entry = st.entry(&id).await?;
    let s = entry.session.lock().await;
    Ok(Json(WireSession::from(&s.snapshot())))
}

async fn step_session(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<StepRequest>, JsonRejection>,
) -> ApiResult<Json<StepResponse>> {
    let entry = st.entry(&id).await?;
    let Json(req) = body?;
    if req.count < 1 {
        return Err(ApiError::BadRequest("count must be at least 1".into()));
    }
    let mut guard = entry.session.clone().try_lock_owned().map_err(|_| busy())?;
    if matches!(guard.phase(), Phase::AwaitVerdict | Phase::Done | Phase::Failed) {
        return Err(SessionError::WrongPhase(guard.phase()).into());
    }
    let tx = entry.tx.clone();
    let count = req.count as usize;
    // advisor calls may block on the network
    let outcome = tokio::task::spawn_blocking(move || {
        let mut events = Vec::new();
        let mut advisor_error = None;
        for _ in 0..count {
            if matches!(guard.phase(), Phase::AwaitVerdict | Phase::Done | Phase::Failed) {
                break;
            }
            match guard.step() {
                Ok(ev) => {
                    let _ = tx.send(ev.clone());
                    events.push(ev);
                }
                Err(SessionError::Advisor(e)) => {
                    advisor_error = Some(e.to_string());
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        Ok(StepResponse { events, seq: guard.seq(), phase: guard.phase(), advisor_error })
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))??;
    if outcome.events.is_empty() {
        if let Some(e) = &outcome.advisor_error {
            return Err(ApiError::BadGateway(e.clone()));
        }
    }
    Ok(Json(outcome))
}

async fn submit_verdict(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<VerdictRequest>, JsonRejection>,
) -> ApiResult<Json<VerdictResponse>> {
    let entry = st.entry(&id).await?;
    let Json(req) = body?;
    let mut s = entry.session.try_lock().map_err(|_| busy())?;
    let verdicts: Vec<_> = req.verdicts.iter().map(|v| v.to_core()).collect();
    let event = s.submit_verdict(&verdicts)?;
    let _ = entry.tx.send(event.clone());
    Ok(Json(VerdictResponse { event, seq: s.seq(), phase: s.phase() }))
}

async fn delete_session(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    let removed = st.sessions.write().await.remove(&id);
    match removed {
        // dropping the entry drops the sender, which ends every open stream
        Some(_) => Ok(StatusCode::NO_CONTENT),
        None => Err(ApiError::NotFound(format!("no session {id:?}"))),
    }
}

async fn list_maps(State(st): State<Arc<AppState>>) -> Json<Vec<MapInfo>> {
    Json(st.config.maps.iter().map(MapInfo::of).collect())
}

fn to_sse(ev: &SessionEvent) -> Result<Event, Infallible> {
    let data = serde_json::to_string(ev).expect("events serialize");
    Ok(Event::default().id(ev.seq.to_string()).data(data))
}

struct Tail {
    rx: broadcast::Receiver<SessionEvent>,
    session: Weak<Mutex<PlanningSession>>,
    last: u64,
    backlog: std::collections::VecDeque<SessionEvent>,
}

/// Live part of a stream: broadcast events past `last`, with a resync from
/// the session log if the receiver lagged behind.
fn live(tail: Tail) -> impl Stream<Item = Result<Event, Infallible>> {
    stream::unfold(tail, |mut t| async move {
        loop {
            if let Some(ev) = t.backlog.pop_front() {
                t.last = ev.seq;
                return Some((to_sse(&ev), t));
            }
            match t.rx.recv().await {
                Ok(ev) if ev.seq <= t.last => continue,
                Ok(ev) => {
                    t.last = ev.seq;
                    return Some((to_sse(&ev), t));
                }
                Err(broadcast::error::RecvError::Lagged(_)) => {
                    let session = t.session.upgrade()?;
                    let s = session.lock().await;
                    t.backlog.extend(s.events_after(t.last).iter().cloned());
                }
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    })
}

async fn stream_events(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<StreamQuery>,
    headers: HeaderMap,
) -> ApiResult<Sse<impl Stream<Item = Result<Event, Infallible>>>> {
    let entry = st.entry(&id).await?;
    let from_header = headers.get("last-event-id").and_then(|v| v.to_str().ok()).and_then(|v| v.trim().parse().ok());
    let after = from_header.or(q.after).unwrap_or(0);
    let (history, rx) = {
        let s = entry.session.lock().await;
        (s.events_after(after).to_vec(), entry.tx.subscribe())
    };
    let last = history.last().map_or(after, |e| e.seq);
    let tail = Tail { rx, session: Arc::downgrade(&entry.session), last, backlog: Default::default() };
    drop(entry);
    let head = stream::iter(history.iter().map(to_sse).collect::<Vec<_>>());
    Ok(Sse::new(head.chain(live(tail))).keep_alive(KeepAlive::default()))
}

async fn require_token(State(st): State<Arc<AppState>>, req: Request, next: Next) -> Response {
    if let Some(token) = &st.config.token {
        if req.method() != Method::OPTIONS {
            let ok = req
                .headers()
                .get(header::AUTHORIZATION)
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.strip_prefix("Bearer "))
                .is_some_and(|t| t == token);
            if !ok {
                return ApiError::Unauthorized.into_response();
            }
        }
    }
    next.run(req).await
}

pub fn router(config: ServiceConfig) -> Router {
    let cors = config.ui_origin.as_deref().map(|origin| {
        tower_http::cors::CorsLayer::new()
            .allow_origin(HeaderValue::from_str(origin).expect("--ui-origin is a valid header value"))
            .allow_methods([Method::GET, Method::POST, Method::DELETE])
            .allow_headers([header::CONTENT_TYPE, header::AUTHORIZATION, "last-event-id".parse().unwrap()])
    });
    let state = Arc::new(AppState { config, sessions: RwLock::new(HashMap::new()), next_id: AtomicU64::new(0) });
    let app = Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session).delete(delete_session))
        .route("/sessions/{id}/step", post(step_session))
        .route("/sessions/{id}/verdict", post(submit_verdict))
        .route("/sessions/{id}/events", get(stream_events))
        .route("/maps", get(list_maps))
        .route_layer(middleware::from_fn_with_state(state.clone(), require_token))
        .with_state(state);
    match cors {
        Some(c) => app.layer(c),
        None => app,
    }
}

/// Bind and serve until Ctrl-C.
pub async fn serve(addr: SocketAddr, config: ServiceConfig) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(config))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

/// A service running on its own thread and runtime, stopped on drop.
pub struct ServiceHandle {
    pub addr: SocketAddr,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl ServiceHandle {
    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for ServiceHandle {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Start the service in the background; port 0 picks a free port.
pub fn spawn(addr: SocketAddr, config: ServiceConfig) -> std::io::Result<ServiceHandle> {
    let listener = std::net::TcpListener::bind(addr)?;
    listener.set_nonblocking(true)?;
    let addr = listener.local_addr()?;
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let thread = std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().expect("service runtime");
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(listener).expect("service listener");
            tokio::select! {
                _ = axum::serve(listener, router(config)) => {}
                _ = rx => {}
            }
        });
        rt.shutdown_timeout(std::time::Duration::from_secs(1));
    });
    Ok(ServiceHandle { addr, shutdown: Some(tx), thread: Some(thread) })
}
