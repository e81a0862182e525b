//! HTTP front end: `/session` WebSocket, `/config` and `/health`.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use pzcrawl_core::Scenario;
use serde::Deserialize;
use serde_json::json;
use tokio::net::TcpListener;
use tokio::sync::broadcast::error::RecvError;

use crate::protocol::{ClientMessage, ErrorCode, ServerMessage, MAX_STREAM_RATE};
use crate::session::{spawn_session, SessionOptions, SessionStatus};

/// Shared server state: the named scenarios sessions may start from and the
/// status of every live session.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    scenarios: BTreeMap<String, Scenario>,
    default: String,
    defaults: SessionOptions,
    next_id: AtomicU64,
    sessions: Mutex<BTreeMap<u64, Arc<Mutex<SessionStatus>>>>,
}

impl AppState {
    /// `default` must name one of `scenarios`.
    pub fn new(scenarios: BTreeMap<String, Scenario>, default: &str, defaults: SessionOptions) -> Option<Self> {
        scenarios.contains_key(default).then(|| Self {
            inner: Arc::new(Inner {
                scenarios,
                default: default.to_string(),
                defaults,
                next_id: AtomicU64::new(1),
                sessions: Mutex::new(BTreeMap::new()),
            }),
        })
    }

    pub fn single(name: &str, scenario: Scenario) -> Self {
        Self::new(BTreeMap::from([(name.to_string(), scenario)]), name, SessionOptions::default())
            .expect("default present")
    }

    pub fn with_defaults(mut self, defaults: SessionOptions) -> Self {
        if let Some(inner) = Arc::get_mut(&mut self.inner) {
            inner.defaults = defaults;
        }
        self
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/session", get(session_handler))
        .route("/config", get(config_handler))
        .route("/health", get(health_handler))
        .with_state(state)
}

/// Serves on an already bound listener until the task is dropped.
pub async fn serve(listener: TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

/// Blocking entry point for the command line.
pub fn run(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = TcpListener::bind(addr).await?;
        eprintln!("teleop server listening on {}", listener.local_addr()?);
        serve(listener, state).await
    })
}

#[derive(Debug, Deserialize)]
struct ConfigQuery {
    session: Option<u64>,
    name: Option<String>,
}

async fn config_handler(State(state): State<AppState>, Query(q): Query<ConfigQuery>) -> Response {
    let inner = &state.inner;
    if let Some(id) = q.session {
        let sessions = inner.sessions.lock().unwrap();
        return match sessions.get(&id) {
            Some(s) => {
                let s = s.lock().unwrap();
                Json(json!({"session": id, "name": s.config, "config": s.config_text})).into_response()
            }
            None => (StatusCode::NOT_FOUND, Json(json!({"error": format!("no session {id}")}))).into_response(),
        };
    }
    let name = q.name.unwrap_or_else(|| inner.default.clone());
    match inner.scenarios.get(&name) {
        Some(s) => Json(json!({
            "name": name,
            "config": s.to_cfg_string(),
            "available": inner.scenarios.keys().collect::<Vec<_>>(),
        }))
        .into_response(),
        None => (StatusCode::NOT_FOUND, Json(json!({"error": format!("no config named {name}")}))).into_response(),
    }
}

async fn health_handler(State(state): State<AppState>) -> Json<serde_json::Value> {
    let sessions: Vec<SessionStatus> = state
        .inner
        .sessions
        .lock()
        .unwrap()
        .values()
        .map(|s| s.lock().unwrap().clone())
        .collect();
    let degraded = sessions.iter().any(|s| s.degraded);
    Json(json!({
        "status": if degraded { "degraded" } else { "ok" },
        "sessions": sessions,
    }))
}

#[derive(Debug, Deserialize)]
struct SessionQuery {
    config: Option<String>,
    rate: Option<f64>,
    speed_scale: Option<f64>,
    node_stride: Option<usize>,
}

async fn session_handler(ws: WebSocketUpgrade, State(state): State<AppState>, Query(q): Query<SessionQuery>) -> Response {
    ws.on_upgrade(move |socket| run_session(socket, state, q))
}

async fn send(socket: &mut WebSocket, msg: &ServerMessage) -> bool {
    let text = serde_json::to_string(msg).expect("messages serialize");
    socket.send(Message::Text(text.into())).await.is_ok()
}

async fn reject(mut socket: WebSocket, code: ErrorCode, msg: String) {
    let _ = send(&mut socket, &ServerMessage::Error { code, msg, cmd_id: None }).await;
    let _ = socket.send(Message::Close(None)).await;
}

async fn run_session(mut socket: WebSocket, state: AppState, q: SessionQuery) {
    let inner = &state.inner;
    let name = q.config.unwrap_or_else(|| inner.default.clone());
    let Some(scenario) = inner.scenarios.get(&name).cloned() else {
        return reject(socket, ErrorCode::Config, format!("no config named {name}")).await;
    };
    let mut opts = inner.defaults;
    if let Some(rate) = q.rate {
        if !(rate > 0.0 && rate <= MAX_STREAM_RATE) {
            let msg = format!("rate = {rate} violates 0 < rate <= {MAX_STREAM_RATE}");
            return reject(socket, ErrorCode::OutOfRange, msg).await;
        }
        opts.rate_hz = rate;
    }
    if let Some(scale) = q.speed_scale {
        let (lo, hi) = crate::protocol::SPEED_SCALE_RANGE;
        if !(lo..=hi).contains(&scale) {
            let msg = format!("speed_scale = {scale} violates {lo} <= speed_scale <= {hi}");
            return reject(socket, ErrorCode::OutOfRange, msg).await;
        }
        opts.speed_scale = scale;
    }
    if let Some(stride) = q.node_stride {
        opts.node_stride = stride;
    }

    let id = inner.next_id.fetch_add(1, Ordering::Relaxed);
    let mut handle = match spawn_session(id, &name, scenario, opts) {
        Ok(h) => h,
        Err(e) => return reject(socket, ErrorCode::Config, e.to_string()).await,
    };
    inner.sessions.lock().unwrap().insert(id, Arc::clone(&handle.status));

    let hello = ServerMessage::Session {
        id,
        config: name,
        node_masses: handle.node_masses.clone(),
        node_stride: opts.node_stride,
        rate_hz: opts.rate_hz,
    };
    let mut next_cmd_id = 1u64;
    let mut dropped = 0u64;
    if send(&mut socket, &hello).await {
        loop {
            tokio::select! {
                incoming = socket.recv() => {
                    let text = match incoming {
                        Some(Ok(Message::Text(t))) => t,
                        Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                        Some(Ok(_)) => continue,
                    };
                    match serde_json::from_str::<ClientMessage>(&text) {
                        Ok(m) => {
                            let cmd_id = m.cmd_id.unwrap_or(next_cmd_id);
                            next_cmd_id = next_cmd_id.max(cmd_id) + 1;
                            if handle.commands.send((cmd_id, m.command)).is_err() {
                                break;
                            }
                        }
                        Err(e) => {
                            let msg = ServerMessage::Error { code: ErrorCode::BadRequest, msg: e.to_string(), cmd_id: None };
                            if !send(&mut socket, &msg).await {
                                break;
                            }
                        }
                    }
                }
                reply = handle.replies.recv() => {
                    let Some(reply) = reply else { break };
                    let fatal = matches!(reply, ServerMessage::Error { code: ErrorCode::SimFailure, .. });
                    if !send(&mut socket, &reply).await || fatal {
                        break;
                    }
                }
                frame = handle.frames.recv() => {
                    match frame {
                        Ok(f) => {
                            if !send(&mut socket, &ServerMessage::State(f)).await {
                                break;
                            }
                        }
                        Err(RecvError::Lagged(n)) => {
                            dropped += n;
                            if dropped > opts.max_dropped {
                                let msg = format!("client fell behind: {dropped} frames dropped");
                                let _ = send(&mut socket, &ServerMessage::Error { code: ErrorCode::Lagged, msg, cmd_id: None }).await;
                                break;
                            }
                        }
                        Err(RecvError::Closed) => break,
                    }
                }
            }
        }
    }
    inner.sessions.lock().unwrap().remove(&id);
    drop(handle.commands);
    let _ = socket.send(Message::Close(None)).await;
}
