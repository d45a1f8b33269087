#![allow(dead_code)]

use std::path::Path;
use std::sync::{mpsc, Arc};
use std::thread;
use std::time::Duration;

use sceneloom_core::action::{Action, ActionBatch};
use sceneloom_core::agent::{SessionConfig, SessionSnapshot, SessionStatus};
use sceneloom_core::gateway::GatewayKind;
use sceneloom_service::{api, SessionManager};
use serde_json::{json, Value};

pub struct Server {
    pub url: String,
    pub manager: Arc<SessionManager>,
}

pub fn small_defaults() -> SessionConfig {
    SessionConfig {
        width: 96,
        height: 72,
        ..SessionConfig::default()
    }
}

/// Serves `root` on a loopback port from a background runtime.
pub fn start(root: &Path, defaults: SessionConfig) -> Server {
    let manager = SessionManager::open(root, defaults).unwrap();
    let (tx, rx) = mpsc::channel();
    let m = manager.clone();
    thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, api::router(m)).await.unwrap();
        });
    });
    let addr = rx.recv().unwrap();
    Server {
        url: format!("http://{addr}"),
        manager,
    }
}

pub fn client() -> reqwest::blocking::Client {
    reqwest::blocking::Client::builder().timeout(Duration::from_secs(60)).build().unwrap()
}

pub fn create(server: &Server, instruction: &str, config: Value) -> Value {
    let resp = client()
        .post(format!("{}/sessions", server.url))
        .json(&json!({ "instruction": instruction, "config": config }))
        .send()
        .unwrap();
    assert_eq!(resp.status().as_u16(), 201, "{}", resp.text().unwrap());
    resp.json().unwrap()
}

pub fn snapshot(server: &Server, id: &str) -> SessionSnapshot {
    client()
        .get(format!("{}/sessions/{id}", server.url))
        .send()
        .unwrap()
        .json()
        .unwrap()
}

/// Waits for the session loop to go idle, then reads the snapshot over HTTP.
pub fn wait_idle(server: &Server, id: &str) -> SessionSnapshot {
    let snap = server.manager.wait_idle(id, Duration::from_secs(120)).unwrap();
    assert_ne!(snap.status, SessionStatus::Running, "session {id} is still running");
    snapshot(server, id)
}

pub fn respond(actions: Vec<Action>) -> String {
    ActionBatch::new(actions).to_response_text()
}

pub fn replay(responses: Vec<String>) -> Value {
    serde_json::to_value(GatewayKind::Replay { responses }).unwrap()
}

pub fn scripted(policy: &str) -> Value {
    serde_json::to_value(GatewayKind::Scripted { policy: policy.into() }).unwrap()
}
