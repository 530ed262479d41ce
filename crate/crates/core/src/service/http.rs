//! HTTP front end. Every response body, including errors and not-found, is
//! JSON except the telemetry stream (NDJSON) and static UI assets.

use std::convert::Infallible;
use std::future::Future;
use std::path::{Component, Path, PathBuf};
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::rejection::{BytesRejection, QueryRejection};
use axum::extract::{Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use tokio::net::TcpListener;
use tokio::sync::broadcast;

use super::driver::DriverGuard;
use super::tickloop::{ControlHandle, ServiceError};
use crate::daps::StoreError;
use crate::protocol::{CommandMessage, Reply, TelemetryFrame};

pub const DRIVER_TOKEN_HEADER: &str = "x-driver-token";
pub const DEFAULT_STREAM_PERIOD_MS: u64 = 100;

#[derive(Clone)]
struct AppState {
    handle: ControlHandle,
    ui_dir: Option<Arc<PathBuf>>,
}

/// Builds the service router. Without `ui_dir` the service runs headless and
/// UI paths answer 404.
pub fn router(handle: ControlHandle, ui_dir: Option<PathBuf>) -> Router {
    let state = AppState { handle, ui_dir: ui_dir.map(Arc::new) };
    Router::new()
        .route("/api/command", post(command))
        .route("/api/driver/claim", post(claim))
        .route("/api/driver/release", post(release))
        .route("/api/telemetry/stream", get(stream))
        .route("/api/samples", get(samples))
        .route("/", get(ui_root))
        .route("/ui/{*path}", get(ui_asset))
        .fallback(not_found)
        .method_not_allowed_fallback(method_not_allowed)
        .with_state(state)
}

/// Serves `app` until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    app: Router,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await
}

fn reply(status: StatusCode, body: Reply) -> Response {
    (status, Json(body)).into_response()
}

fn error(status: StatusCode, msg: impl Into<String>) -> Response {
    reply(status, Reply::error(msg))
}

fn token(headers: &HeaderMap) -> Option<&str> {
    headers.get(DRIVER_TOKEN_HEADER).and_then(|v| v.to_str().ok())
}

fn service_error(err: ServiceError) -> Response {
    let status = match err {
        ServiceError::Malformed(_) => StatusCode::BAD_REQUEST,
        ServiceError::NotDriver => StatusCode::FORBIDDEN,
        ServiceError::Range(_) => StatusCode::UNPROCESSABLE_ENTITY,
        ServiceError::Halted(_) => StatusCode::SERVICE_UNAVAILABLE,
    };
    error(status, err.to_string())
}

async fn command(State(st): State<AppState>, headers: HeaderMap, body: Result<Bytes, BytesRejection>) -> Response {
    let body = match body {
        Ok(b) => b,
        Err(e) => return error(e.status(), e.body_text()),
    };
    let cmd = match CommandMessage::parse(&body) {
        Ok(c) => c,
        Err(e) => return service_error(ServiceError::Malformed(e.0)),
    };
    match st.handle.submit(cmd, token(&headers)).await {
        Ok(tick) => reply(StatusCode::OK, Reply::applied(tick)),
        Err(e) => service_error(e),
    }
}

async fn claim(State(st): State<AppState>) -> Response {
    match st.handle.driver().claim() {
        Some(token) => reply(StatusCode::OK, Reply::Token { ok: true, token }),
        None => error(StatusCode::CONFLICT, "driver token already held"),
    }
}

async fn release(State(st): State<AppState>, headers: HeaderMap) -> Response {
    match token(&headers) {
        Some(t) if st.handle.driver().release(t) => reply(StatusCode::OK, Reply::Released { ok: true }),
        _ => error(StatusCode::FORBIDDEN, "not the driver"),
    }
}

#[derive(Debug, Deserialize)]
struct StreamParams {
    period_ms: Option<String>,
    token: Option<String>,
}

struct StreamState {
    rx: broadcast::Receiver<Arc<TelemetryFrame>>,
    period_ms: u64,
    _guard: Option<DriverGuard>,
}

async fn stream(State(st): State<AppState>, params: Result<Query<StreamParams>, QueryRejection>) -> Response {
    let Query(params) = match params {
        Ok(p) => p,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.body_text()),
    };
    let tick_ms = st.handle.tick_ms();
    let period_ms = match params.period_ms.as_deref().map(str::parse::<u64>) {
        None => DEFAULT_STREAM_PERIOD_MS.max(tick_ms),
        Some(Ok(p)) if p > 0 && p % tick_ms == 0 => p,
        Some(_) => {
            return error(
                StatusCode::BAD_REQUEST,
                format!("period_ms must be a positive multiple of the {tick_ms} ms tick"),
            )
        }
    };
    let guard = match params.token {
        Some(t) if st.handle.driver().is_driver(Some(&t)) => Some(DriverGuard::new(st.handle.driver().clone(), t)),
        Some(_) => return error(StatusCode::FORBIDDEN, "not the driver"),
        None => None,
    };
    let state = StreamState { rx: st.handle.subscribe(), period_ms, _guard: guard };
    let frames = futures::stream::unfold(state, |mut s| async move {
        loop {
            match s.rx.recv().await {
                Ok(frame) if frame.t_ms % s.period_ms == 0 => {
                    return Some((Ok::<_, Infallible>(Bytes::from(frame.to_json_line())), s));
                }
                Ok(_) => continue,
                // lagging behind the tick loop or loop gone: end the stream
                Err(_) => return None,
            }
        }
    });
    ([(header::CONTENT_TYPE, "application/x-ndjson")], Body::from_stream(frames)).into_response()
}

#[derive(Debug, Deserialize)]
struct SampleParams {
    id: Option<String>,
    from: Option<String>,
    to: Option<String>,
}

async fn samples(State(st): State<AppState>, params: Result<Query<SampleParams>, QueryRejection>) -> Response {
    let Query(params) = match params {
        Ok(p) => p,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.body_text()),
    };
    let Some(id) = params.id else {
        return error(StatusCode::BAD_REQUEST, "missing \"id\"");
    };
    let bound = |name: &str, v: Option<String>, default: u64| match v {
        None => Ok(default),
        Some(s) => s.parse::<u64>().map_err(|_| format!("\"{name}\" must be a non-negative integer")),
    };
    let range = bound("from", params.from, 0).and_then(|f| Ok((f, bound("to", params.to, u64::MAX)?)));
    let (from, to) = match range {
        Ok(r) => r,
        Err(msg) => return error(StatusCode::BAD_REQUEST, msg),
    };
    match st.handle.store().query(&id, from, to) {
        Ok(list) => Json(list).into_response(),
        Err(e @ StoreError::UnknownSensor(_)) => error(StatusCode::NOT_FOUND, e.to_string()),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn ui_root(State(st): State<AppState>) -> Response {
    serve_asset(st.ui_dir.as_deref(), "index.html").await
}

async fn ui_asset(State(st): State<AppState>, axum::extract::Path(path): axum::extract::Path<String>) -> Response {
    serve_asset(st.ui_dir.as_deref(), &path).await
}

async fn serve_asset(dir: Option<&PathBuf>, rel: &str) -> Response {
    let Some(dir) = dir else {
        return error(StatusCode::NOT_FOUND, "no UI assets installed");
    };
    let rel = Path::new(rel);
    if !rel.components().all(|c| matches!(c, Component::Normal(_))) {
        return error(StatusCode::NOT_FOUND, "not found");
    }
    match tokio::fs::read(dir.join(rel)).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, content_type(rel))], bytes).into_response(),
        Err(_) => error(StatusCode::NOT_FOUND, "not found"),
    }
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js") | Some("mjs") => "text/javascript",
        Some("css") => "text/css",
        Some("json") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        _ => "application/octet-stream",
    }
}

async fn not_found() -> Response {
    error(StatusCode::NOT_FOUND, "not found")
}

async fn method_not_allowed() -> Response {
    error(StatusCode::METHOD_NOT_ALLOWED, "method not allowed")
}
