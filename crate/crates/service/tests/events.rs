mod common;

use std::collections::BTreeSet;
use std::time::Duration;

use common::{create, respond, scripted, start, wait_idle, Server};
use futures::StreamExt;
use sceneloom_core::action::Action;
use sceneloom_core::agent::{Session, SessionConfig, SessionEvent, SessionStatus};
use sceneloom_core::gateway::{GatewayKind, ReplayGateway};
use sceneloom_service::{EventRecord, SessionManager};
use serde_json::json;
use tokio_tungstenite::tungstenite::Message;

/// Reads events over the WebSocket until `count` have arrived.
fn read_events(server: &Server, id: &str, from: u64, count: usize) -> Vec<EventRecord> {
    let url = format!("{}/sessions/{id}/events?from={from}", server.url.replace("http://", "ws://"));
    let rt = tokio::runtime::Runtime::new().unwrap();
    rt.block_on(async move {
        let (mut ws, _) = tokio_tungstenite::connect_async(url).await.unwrap();
        let mut out = Vec::new();
        while out.len() < count {
            let frame = tokio::time::timeout(Duration::from_secs(30), ws.next())
                .await
                .expect("event arrives")
                .unwrap()
                .unwrap();
            if let Message::Text(text) = frame {
                out.push(serde_json::from_str(&text).unwrap());
            }
        }
        out
    })
}

fn assert_gapless(events: &[EventRecord], from: u64) {
    for (i, e) in events.iter().enumerate() {
        assert_eq!(e.seq, from + i as u64);
    }
}

/// Status and step counter implied by an event history.
fn fold(events: &[EventRecord]) -> (SessionStatus, u32) {
    let mut status = SessionStatus::Running;
    let mut step = 0;
    for e in events {
        match &e.event {
            SessionEvent::StatusChanged { status: s, .. } => status = *s,
            SessionEvent::BatchExecuted { step: t, .. } | SessionEvent::BatchRejected { step: t, .. } => step = *t,
            _ => {}
        }
    }
    (status, step)
}

#[test]
fn full_history_is_gapless_and_reconstructs_the_snapshot() {
    let root = tempfile::tempdir().unwrap();
    let server = start(root.path(), common::small_defaults());
    let id = create(&server, "four things", json!({ "gateway": scripted("grid-layout") }))["id"]
        .as_str()
        .unwrap()
        .to_string();
    let snap = wait_idle(&server, &id);
    let total = server.manager.event_count(&id).unwrap() as usize;
    let events = read_events(&server, &id, 0, total);
    assert_gapless(&events, 0);
    assert!(events.iter().all(|e| e.session_id == id));
    assert_eq!(fold(&events), (snap.status, snap.step));
    let kinds: BTreeSet<_> = events
        .iter()
        .map(|e| serde_json::to_value(e).unwrap()["kind"].as_str().unwrap().to_string())
        .collect();
    for k in ["step_started", "image_ready", "response_received", "batch_executed", "status_changed"] {
        assert!(kinds.contains(k), "missing {k}");
    }
}

#[test]
fn reconnecting_and_parallel_subscribers_see_the_same_sequence() {
    let root = tempfile::tempdir().unwrap();
    let server = start(root.path(), common::small_defaults());
    let id = create(&server, "keep busy", json!({ "gateway": scripted("never-finish"), "max_steps": 8 }))["id"]
        .as_str()
        .unwrap()
        .to_string();
    // subscribe while the loop is still going
    let first = read_events(&server, &id, 0, 10);
    assert_gapless(&first, 0);
    wait_idle(&server, &id);
    let total = server.manager.event_count(&id).unwrap() as usize;
    let rest = read_events(&server, &id, 10, total - 10);
    assert_gapless(&rest, 10);
    let a = read_events(&server, &id, 0, total);
    let b = read_events(&server, &id, 0, total);
    assert_eq!(a, b);
    assert_eq!([first, rest].concat(), a);
}

#[test]
fn live_events_follow_the_backlog() {
    let root = tempfile::tempdir().unwrap();
    let server = start(root.path(), common::small_defaults());
    let id = create(&server, "keep busy", json!({ "gateway": scripted("never-finish"), "max_steps": 2 }))["id"]
        .as_str()
        .unwrap()
        .to_string();
    wait_idle(&server, &id);
    let before = server.manager.event_count(&id).unwrap();
    let m = server.manager.clone();
    let id2 = id.clone();
    let poster = std::thread::spawn(move || {
        std::thread::sleep(Duration::from_millis(300));
        m.post_message(&id2, "one more").unwrap();
    });
    let events = read_events(&server, &id, 0, before as usize + 3);
    poster.join().unwrap();
    assert_gapless(&events, 0);
    assert!(matches!(&events[before as usize].event, SessionEvent::SystemMessage { message } if message.text == "one more"));
}

#[test]
fn restart_resumes_interrupted_and_paused_sessions() {
    let root = tempfile::tempdir().unwrap();
    let defaults = common::small_defaults();
    // a run cut short after five steps, status still running
    let cut_dir = root.path().join("cut");
    {
        let cfg = SessionConfig {
            gateway: GatewayKind::Scripted { policy: "never-finish".into() },
            ..defaults.clone()
        };
        let mut s = Session::new("cut", "keep busy", cfg, Some(cut_dir.clone())).unwrap();
        for _ in 0..5 {
            s.step(&mut |_| {}).unwrap();
        }
    }
    // a run paused by an unreachable model
    let responses = vec![
        respond(vec![Action::Create { name: "crate".into(), description: "wooden crate".into() }]),
        respond(vec![Action::Finish]),
    ];
    {
        let cfg = SessionConfig {
            gateway: GatewayKind::Replay { responses },
            ..defaults.clone()
        };
        let mut s = Session::new("paused", "one crate", cfg, Some(root.path().join("paused")))
            .unwrap()
            .with_gateway(Box::new(ReplayGateway::new(vec![])));
        assert_eq!(s.run(&mut |_| {}).unwrap(), SessionStatus::Paused);
    }
    let manager = SessionManager::open(root.path(), defaults).unwrap();
    let cut = manager.wait_idle("cut", Duration::from_secs(120)).unwrap();
    assert_eq!((cut.status, cut.step), (SessionStatus::Exhausted, 20));
    let paused = manager.wait_idle("paused", Duration::from_secs(120)).unwrap();
    assert_eq!((paused.status, paused.step), (SessionStatus::Finished, 2));
    assert_eq!(paused.scene.objects.len(), 1);
    for dir in ["cut", "paused"] {
        sceneloom_core::agent::replay::replay_verify(&root.path().join(dir).join("trajectory.jsonl")).unwrap();
    }
}

#[test]
fn event_numbering_survives_a_restart() {
    let root = tempfile::tempdir().unwrap();
    let id;
    let before;
    {
        let server = start(root.path(), common::small_defaults());
        id = create(&server, "keep busy", json!({ "gateway": scripted("never-finish"), "max_steps": 3 }))["id"]
            .as_str()
            .unwrap()
            .to_string();
        wait_idle(&server, &id);
        before = server.manager.event_count(&id).unwrap();
    }
    let server = start(root.path(), common::small_defaults());
    assert_eq!(server.manager.event_count(&id).unwrap(), before);
    server.manager.post_message(&id, "keep going").unwrap();
    wait_idle(&server, &id);
    let total = server.manager.event_count(&id).unwrap();
    assert!(total > before);
    let events = read_events(&server, &id, 0, total as usize);
    assert_gapless(&events, 0);
}
