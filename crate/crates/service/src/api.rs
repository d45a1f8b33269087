//! REST and WebSocket surface.

use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast::error::RecvError;

use crate::manager::{ConfigOverrides, ServiceError, SessionManager};

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: &'static str,
    message: String,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let (status, error) = match &self {
            ServiceError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            ServiceError::BadConfig(_) => (StatusCode::BAD_REQUEST, "bad_config"),
            ServiceError::BadRequest(_) => (StatusCode::BAD_REQUEST, "bad_request"),
            ServiceError::SessionAborted => (StatusCode::CONFLICT, "session_aborted"),
            ServiceError::Internal(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        let body = ErrorBody {
            error,
            message: self.to_string(),
        };
        (status, Json(body)).into_response()
    }
}

#[derive(Debug, Deserialize)]
pub struct CreateRequest {
    pub instruction: String,
    #[serde(default)]
    pub config: ConfigOverrides,
}

#[derive(Debug, Deserialize)]
pub struct MessageRequest {
    pub text: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MessageAck {
    pub delivery_step: u32,
}

#[derive(Debug, Deserialize)]
pub struct EventsQuery {
    #[serde(default)]
    pub from: u64,
}

type Shared = State<Arc<SessionManager>>;

/// Runs a blocking manager call off the async workers.
async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ServiceError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))?
}

async fn create_session(State(m): Shared, Json(req): Json<CreateRequest>) -> Result<impl IntoResponse, ServiceError> {
    let d = blocking(move || m.create(&req.instruction, req.config)).await?;
    Ok((StatusCode::CREATED, Json(d)))
}

async fn list_sessions(State(m): Shared) -> impl IntoResponse {
    Json(m.list())
}

async fn get_session(State(m): Shared, Path(id): Path<String>) -> Result<impl IntoResponse, ServiceError> {
    Ok(Json(m.snapshot(&id)?))
}

async fn post_message(
    State(m): Shared,
    Path(id): Path<String>,
    Json(req): Json<MessageRequest>,
) -> Result<impl IntoResponse, ServiceError> {
    let delivery_step = blocking(move || m.post_message(&id, &req.text)).await?;
    Ok(Json(MessageAck { delivery_step }))
}

async fn abort_session(State(m): Shared, Path(id): Path<String>) -> Result<impl IntoResponse, ServiceError> {
    Ok(Json(blocking(move || m.abort(&id)).await?))
}

async fn step_image(State(m): Shared, Path((id, t)): Path<(String, u32)>) -> Result<impl IntoResponse, ServiceError> {
    let png = m.step_image(&id, t)?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png))
}

async fn events(
    State(m): Shared,
    Path(id): Path<String>,
    Query(q): Query<EventsQuery>,
    ws: WebSocketUpgrade,
) -> Result<Response, ServiceError> {
    let (backlog, rx) = m.subscribe(&id, q.from)?;
    Ok(ws.on_upgrade(move |socket| stream_events(socket, q.from, backlog, rx)))
}

async fn stream_events(
    mut socket: WebSocket,
    from: u64,
    backlog: Vec<crate::manager::EventRecord>,
    mut rx: tokio::sync::broadcast::Receiver<crate::manager::EventRecord>,
) {
    let mut next = from;
    for record in backlog {
        next = record.seq + 1;
        if send(&mut socket, &record).await.is_err() {
            return;
        }
    }
    loop {
        tokio::select! {
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                Some(Ok(_)) => {}
            },
            received = rx.recv() => match received {
                Ok(record) if record.seq < next => {}
                Ok(record) => {
                    next = record.seq + 1;
                    if send(&mut socket, &record).await.is_err() {
                        return;
                    }
                }
                Err(RecvError::Lagged(_)) => {
                    // the client reconnects with ?from=<next> and misses nothing
                    let _ = socket.send(Message::Close(None)).await;
                    return;
                }
                Err(RecvError::Closed) => return,
            },
        }
    }
}

async fn send(socket: &mut WebSocket, record: &crate::manager::EventRecord) -> Result<(), axum::Error> {
    let text = serde_json::to_string(record).expect("events serialize");
    socket.send(Message::Text(text.into())).await
}

pub fn router(manager: Arc<SessionManager>) -> Router {
    Router::new()
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/messages", post(post_message))
        .route("/sessions/{id}/abort", post(abort_session))
        .route("/sessions/{id}/steps/{t}/image", get(step_image))
        .route("/sessions/{id}/events", get(events))
        .with_state(manager)
}
