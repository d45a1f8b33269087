mod common;

use std::fs;

use common::{client, create, scripted, snapshot, start, wait_idle};
use sceneloom_core::agent::{read_trajectory, SessionRecord, SessionStatus};
use serde_json::{json, Value};

#[test]
fn create_uses_default_budget_and_unique_ids() {
    let root = tempfile::tempdir().unwrap();
    let server = start(root.path(), common::small_defaults());
    let a = create(&server, "a reading nook", json!({ "gateway": scripted("never-finish") }));
    let b = create(&server, "a reading nook", json!({ "gateway": scripted("never-finish") }));
    let (ida, idb) = (a["id"].as_str().unwrap(), b["id"].as_str().unwrap());
    assert_ne!(ida, idb);
    assert!(ida.chars().all(|c| c.is_ascii_alphanumeric()));
    wait_idle(&server, ida);
    wait_idle(&server, idb);
    let record: SessionRecord = serde_json::from_str(&fs::read_to_string(root.path().join(ida).join("session.json")).unwrap()).unwrap();
    assert_eq!(record.config.max_steps, 20);
    let listed: Vec<Value> = client().get(format!("{}/sessions", server.url)).send().unwrap().json().unwrap();
    assert_eq!(listed.len(), 2);
}

#[test]
fn bad_requests_are_rejected() {
    let root = tempfile::tempdir().unwrap();
    let server = start(root.path(), common::small_defaults());
    let resp = client()
        .post(format!("{}/sessions", server.url))
        .json(&json!({ "instruction": "   " }))
        .send()
        .unwrap();
    assert_eq!(resp.status().as_u16(), 400);
    let body: Value = resp.json().unwrap();
    assert_eq!(body["error"], "bad_config");
    let resp = client()
        .post(format!("{}/sessions", server.url))
        .json(&json!({ "instruction": "x", "config": { "max_steps": 0 } }))
        .send()
        .unwrap();
    assert_eq!(resp.status().as_u16(), 400);
    for path in ["/sessions/nope", "/sessions/nope/steps/1/image"] {
        let resp = client().get(format!("{}{path}", server.url)).send().unwrap();
        assert_eq!(resp.status().as_u16(), 404, "{path}");
    }
    let resp = client()
        .post(format!("{}/sessions/nope/messages", server.url))
        .json(&json!({ "text": "hi" }))
        .send()
        .unwrap();
    assert_eq!(resp.status().as_u16(), 404);
}

#[test]
fn finished_session_snapshot_matches_its_files() {
    let root = tempfile::tempdir().unwrap();
    let server = start(root.path(), common::small_defaults());
    let id = create(&server, "four things", json!({ "gateway": scripted("grid-layout") }))["id"]
        .as_str()
        .unwrap()
        .to_string();
    let snap = wait_idle(&server, &id);
    assert_eq!(snap.status, SessionStatus::Finished);
    let dir = root.path().join(&id);
    let trajectory = read_trajectory(&dir.join("trajectory.jsonl")).unwrap();
    assert_eq!(snap.last_hash, trajectory.last().unwrap().step_hash);
    let highest = (1..).take_while(|t| dir.join(format!("steps/step_{t}.png")).exists()).last().unwrap();
    assert_eq!(snap.latest_image.as_deref(), Some(format!("steps/step_{highest}.png").as_str()));
    let png = client()
        .get(format!("{}/sessions/{id}/steps/{highest}/image", server.url))
        .send()
        .unwrap();
    assert_eq!(png.headers()["content-type"], "image/png");
    assert_eq!(png.bytes().unwrap().to_vec(), fs::read(dir.join(format!("steps/step_{highest}.png"))).unwrap());
}

#[test]
fn posted_message_lands_in_the_acknowledged_step() {
    let root = tempfile::tempdir().unwrap();
    let server = start(root.path(), common::small_defaults());
    let id = create(&server, "keep busy", json!({ "gateway": scripted("never-finish"), "max_steps": 12 }))["id"]
        .as_str()
        .unwrap()
        .to_string();
    let ack: Value = client()
        .post(format!("{}/sessions/{id}/messages", server.url))
        .json(&json!({ "text": "make the probe blue" }))
        .send()
        .unwrap()
        .json()
        .unwrap();
    let delivery = ack["delivery_step"].as_u64().unwrap() as u32;
    let snap = wait_idle(&server, &id);
    assert_eq!(snap.status, SessionStatus::Exhausted);
    let trajectory = read_trajectory(&root.path().join(&id).join("trajectory.jsonl")).unwrap();
    for step in &trajectory {
        assert_eq!(step.prompt.contains("make the probe blue"), step.step == delivery, "step {}", step.step);
    }
}

#[test]
fn exhausted_sessions_reopen_and_aborted_ones_refuse_messages() {
    let root = tempfile::tempdir().unwrap();
    let server = start(root.path(), common::small_defaults());
    let id = create(&server, "keep busy", json!({ "gateway": scripted("never-finish"), "max_steps": 4 }))["id"]
        .as_str()
        .unwrap()
        .to_string();
    assert_eq!(wait_idle(&server, &id).status, SessionStatus::Exhausted);
    let ack: Value = client()
        .post(format!("{}/sessions/{id}/messages", server.url))
        .json(&json!({ "text": "two more steps please" }))
        .send()
        .unwrap()
        .json()
        .unwrap();
    assert_eq!(ack["delivery_step"], 5);
    let snap = wait_idle(&server, &id);
    assert_eq!((snap.status, snap.step, snap.budget), (SessionStatus::Exhausted, 6, 6));

    let aborted: Value = client()
        .post(format!("{}/sessions/{id}/abort", server.url))
        .send()
        .unwrap()
        .json()
        .unwrap();
    assert_eq!(aborted["status"], "aborted");
    let resp = client()
        .post(format!("{}/sessions/{id}/messages", server.url))
        .json(&json!({ "text": "hello?" }))
        .send()
        .unwrap();
    assert_eq!(resp.status().as_u16(), 409);
    assert_eq!(snapshot(&server, &id).status, SessionStatus::Aborted);
}

#[test]
fn abort_stops_a_running_session() {
    let root = tempfile::tempdir().unwrap();
    let server = start(root.path(), common::small_defaults());
    let id = create(&server, "keep busy", json!({ "gateway": scripted("never-finish"), "max_steps": 500 }))["id"]
        .as_str()
        .unwrap()
        .to_string();
    client().post(format!("{}/sessions/{id}/abort", server.url)).send().unwrap();
    let snap = wait_idle(&server, &id);
    assert_eq!(snap.status, SessionStatus::Aborted);
    assert!(snap.step < 500);
}
