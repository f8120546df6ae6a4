//! HTTP session service.
//!
//! Each session owns one pipeline behind an async mutex. A step that finds
//! the mutex held answers 409 instead of queueing, so a session never has
//! two turns in flight. The registry lock is only held for lookups.

use std::collections::HashMap;
use std::convert::Infallible;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream};
use serde::Deserialize;
use tokio::sync::broadcast;
use worldkit_core::envelope::TIMESTAMP_KEY;
use worldkit_core::memory::MemoryEvent;
use worldkit_core::pipeline::TurnErrorKind;
use worldkit_core::representation::{format_wkpc, DepthCamera};
use worldkit_core::{Pipeline, PipelineConfig, SessionId};

use crate::wire::{
    CreateSession, ErrorBody, MemoryView, SessionCreated, StepRequest, WireCamera, WireDepth, WireEnvelope,
};

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_RAYS: u32 = 64;
pub const DEFAULT_FOV: f64 = 90.0;
pub const MAX_RAYS: u32 = 4096;

pub struct Slot {
    pipeline: Arc<tokio::sync::Mutex<Pipeline>>,
    events: broadcast::Sender<String>,
    closed: AtomicBool,
}

impl Slot {
    /// Shared handle to the session's pipeline lock.
    pub fn pipeline(&self) -> Arc<tokio::sync::Mutex<Pipeline>> {
        self.pipeline.clone()
    }

    pub fn is_closed(&self) -> bool {
        self.closed.load(Ordering::SeqCst)
    }
}

#[derive(Clone, Default)]
pub struct AppState {
    sessions: Arc<Mutex<HashMap<String, Arc<Slot>>>>,
    defaults: Option<PipelineConfig>,
}

impl AppState {
    pub fn new(defaults: Option<PipelineConfig>) -> Self {
        Self {
            sessions: Arc::default(),
            defaults,
        }
    }

    pub fn slot(&self, id: &str) -> Option<Arc<Slot>> {
        self.sessions.lock().expect("registry poisoned").get(id).cloned()
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().expect("registry poisoned").len()
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", axum::routing::delete(delete_session))
        .route("/sessions/{id}/step", post(step_session))
        .route("/sessions/{id}/export", get(export_session))
        .route("/sessions/{id}/memory", get(session_memory))
        .route("/sessions/{id}/events", get(session_events))
        .layer(tower_http::cors::CorsLayer::permissive())
        .with_state(state)
}

pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

fn fail(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(ErrorBody { error: message.into() })).into_response()
}

fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis())
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> Response {
    let request: CreateSession = if body.iter().all(u8::is_ascii_whitespace) {
        CreateSession { config: None }
    } else {
        match serde_json::from_slice(&body) {
            Ok(r) => r,
            Err(e) => return fail(StatusCode::BAD_REQUEST, format!("invalid config: {e}")),
        }
    };
    let Some(config) = request.config.or_else(|| state.defaults.clone()) else {
        return fail(StatusCode::BAD_REQUEST, "invalid config: missing config");
    };
    let id = format!("s{}", uuid::Uuid::new_v4().simple());
    let pipeline = match Pipeline::build_with_id(config, SessionId::from_existing(id.clone())) {
        Ok(p) => p,
        Err(e) => return fail(StatusCode::BAD_REQUEST, e.to_string()),
    };
    let (events, _) = broadcast::channel(64);
    let slot = Arc::new(Slot {
        pipeline: Arc::new(tokio::sync::Mutex::new(pipeline)),
        events,
        closed: AtomicBool::new(false),
    });
    state.sessions.lock().expect("registry poisoned").insert(id.clone(), slot);
    (StatusCode::CREATED, Json(SessionCreated { session_id: id })).into_response()
}

async fn step_session(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> Response {
    let Some(slot) = state.slot(&id) else {
        return fail(StatusCode::NOT_FOUND, format!("unknown session {id}"));
    };
    if slot.is_closed() {
        return fail(StatusCode::GONE, "session closed");
    }
    let request: StepRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return fail(StatusCode::BAD_REQUEST, format!("invalid step: {e}")),
    };
    if let Some(ctx) = request.query.as_ref().and_then(|q| q.context_ref.as_deref()) {
        if ctx != id {
            return fail(StatusCode::UNPROCESSABLE_ENTITY, "context_ref must name the stepped session");
        }
    }
    let input = match request.to_turn_input() {
        Ok(i) => i,
        Err(e) => return fail(StatusCode::BAD_REQUEST, e.to_string()),
    };
    let Ok(mut guard) = slot.pipeline.clone().try_lock_owned() else {
        return fail(StatusCode::CONFLICT, "a turn is already in flight for this session");
    };
    let outcome = tokio::task::spawn_blocking(move || guard.call_once(&input)).await;
    let outcome = match outcome {
        Ok(o) => o,
        Err(e) => return fail(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    };
    let (status, mut envelope) = match outcome {
        Ok(env) => (StatusCode::OK, env),
        Err(e) => {
            let status = match e.kind {
                TurnErrorKind::Closed | TurnErrorKind::Terminal => StatusCode::GONE,
                TurnErrorKind::Rejected | TurnErrorKind::Backend => StatusCode::UNPROCESSABLE_ENTITY,
            };
            (status, e.envelope)
        }
    };
    envelope.metadata.insert(TIMESTAMP_KEY.into(), now_ms().to_string());
    let wire = WireEnvelope::encode(&envelope);
    if status == StatusCode::OK {
        for (i, a) in wire.artifacts.iter().enumerate() {
            if a.frame.is_some() {
                let frame = serde_json::json!({ "turn": wire.turn, "index": i, "artifact": a });
                let _ = slot.events.send(format!("frame\n{frame}"));
            }
        }
        let _ = slot
            .events
            .send(format!("envelope\n{}", serde_json::to_string(&wire).expect("envelope serializes")));
    }
    (status, Json(wire)).into_response()
}

#[derive(Debug, Deserialize)]
struct ExportParams {
    format: String,
    yaw: Option<f64>,
    rays: Option<u32>,
    fov: Option<f64>,
    polar: Option<f64>,
    azimuth: Option<f64>,
}

async fn export_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(params): Query<ExportParams>,
) -> Response {
    let Some(slot) = state.slot(&id) else {
        return fail(StatusCode::NOT_FOUND, format!("unknown session {id}"));
    };
    let pipeline = slot.pipeline.lock().await;
    match params.format.as_str() {
        "pointcloud" => {
            let text = format_wkpc(&pipeline.grid().export_points().points);
            ([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], text).into_response()
        }
        "depth" => match depth_export_from(&pipeline, &params) {
            Ok(d) => Json(d).into_response(),
            Err(e) => fail(StatusCode::BAD_REQUEST, e),
        },
        "memory-log" => {
            ([(header::CONTENT_TYPE, "application/x-ndjson")], memory_log(&pipeline)).into_response()
        }
        other => fail(StatusCode::BAD_REQUEST, format!("unknown export format {other:?}")),
    }
}

/// Depth from the agent's cell centre. Yaw defaults to the heading;
/// polar and azimuth are only echoed for the viewer.
pub fn depth_export(
    pipeline: &Pipeline,
    yaw: Option<f64>,
    rays: Option<u32>,
    fov: Option<f64>,
    polar: Option<f64>,
    azimuth: Option<f64>,
) -> Result<WireDepth, String> {
    use worldkit_core::pose::{normalize_control, AngleKind};
    let pose = pipeline.state().pose;
    let rays = rays.unwrap_or(DEFAULT_RAYS);
    if rays == 0 || rays > MAX_RAYS {
        return Err(format!("rays must lie in 1..={MAX_RAYS}"));
    }
    let fov = fov.unwrap_or(DEFAULT_FOV);
    if !(fov > 0.0 && fov <= 360.0) {
        return Err("fov must lie in (0, 360]".into());
    }
    let angle = |kind, v: f64| normalize_control(kind, v).map_err(|e| e.to_string());
    let camera = pipeline.camera();
    let yaw = angle(AngleKind::Yaw, yaw.unwrap_or(pose.heading.yaw_degrees()))?;
    let polar = angle(AngleKind::Polar, polar.unwrap_or(camera.polar))?;
    let azimuth = angle(AngleKind::Azimuth, azimuth.unwrap_or(camera.azimuth))?;
    let (x, y) = (pose.x as f64 + 0.5, pose.y as f64 + 0.5);
    let depth = pipeline
        .grid()
        .render_depth(DepthCamera { x, y, yaw }, rays, fov)
        .map_err(|e| e.to_string())?;
    Ok(WireDepth::new(
        WireCamera {
            x,
            y,
            yaw,
            polar,
            azimuth,
        },
        depth,
    ))
}

fn depth_export_from(pipeline: &Pipeline, p: &ExportParams) -> Result<WireDepth, String> {
    depth_export(pipeline, p.yaw, p.rays, p.fov, p.polar, p.azimuth)
}

/// The session's memory journal as JSON lines.
pub fn memory_log(pipeline: &Pipeline) -> String {
    let id = pipeline.session_id();
    let mut out = String::new();
    for e in pipeline.memory().journal() {
        let mine = match e {
            MemoryEvent::Open { session }
            | MemoryEvent::Pin { session, .. }
            | MemoryEvent::Compress { session, .. }
            | MemoryEvent::Manage { session }
            | MemoryEvent::Close { session } => session == id,
            MemoryEvent::Record { record } => &record.session == id,
        };
        if mine {
            out.push_str(&serde_json::to_string(e).expect("event serializes"));
            out.push('\n');
        }
    }
    out
}

async fn session_memory(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    let Some(slot) = state.slot(&id) else {
        return fail(StatusCode::NOT_FOUND, format!("unknown session {id}"));
    };
    let pipeline = slot.pipeline.lock().await;
    match pipeline.memory().session(pipeline.session_id()) {
        Some(mem) => Json(MemoryView::new(pipeline.session_id(), mem)).into_response(),
        None => fail(StatusCode::GONE, "session memory released"),
    }
}

async fn delete_session(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    let Some(slot) = state.slot(&id) else {
        return fail(StatusCode::NOT_FOUND, format!("unknown session {id}"));
    };
    slot.closed.store(true, Ordering::SeqCst);
    slot.pipeline.lock().await.close();
    StatusCode::NO_CONTENT.into_response()
}

async fn session_events(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, Response> {
    let Some(slot) = state.slot(&id) else {
        return Err(fail(StatusCode::NOT_FOUND, format!("unknown session {id}")));
    };
    let rx = slot.events.subscribe();
    let s = stream::unfold(rx, |mut rx| async move {
        loop {
            match rx.recv().await {
                Ok(msg) => {
                    let (name, data) = msg.split_once('\n').unwrap_or(("envelope", msg.as_str()));
                    let event = Event::default().event(name).data(data);
                    return Some((Ok(event), rx));
                }
                Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    });
    Ok(Sse::new(s).keep_alive(KeepAlive::new().interval(Duration::from_secs(15))))
}
