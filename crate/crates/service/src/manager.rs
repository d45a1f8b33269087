//! Session host: owns every session, runs each loop on its own thread and
//! fans progress events out to subscribers.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::thread;
use std::time::Duration;

use sceneloom_core::agent::{AgentError, Session, SessionConfig, SessionEvent, SessionSnapshot, SessionStatus};
use sceneloom_core::assets::ProviderKind;
use sceneloom_core::gateway::GatewayKind;
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast;

pub const EVENTS_FILE: &str = "events.jsonl";
const BROADCAST_CAPACITY: usize = 1024;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("session {0} not found")]
    NotFound(String),
    #[error("{0}")]
    BadConfig(String),
    #[error("session is aborted")]
    SessionAborted,
    #[error("{0}")]
    BadRequest(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl From<AgentError> for ServiceError {
    fn from(e: AgentError) -> Self {
        match e {
            AgentError::EmptyInstruction | AgentError::BadConfig(_) | AgentError::Gateway(_) | AgentError::Asset(_) => {
                ServiceError::BadConfig(e.to_string())
            }
            AgentError::EmptyMessage => ServiceError::BadRequest(e.to_string()),
            AgentError::SessionAborted => ServiceError::SessionAborted,
            other => ServiceError::Internal(other.to_string()),
        }
    }
}

/// Per-session config fields a client may override; everything else keeps the host default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub max_steps: Option<u32>,
    pub margin: Option<f64>,
    pub visual_prompting: Option<bool>,
    pub collision_check: Option<bool>,
    pub gateway: Option<GatewayKind>,
    pub assets: Option<ProviderKind>,
    pub width: Option<u32>,
    pub height: Option<u32>,
}

impl ConfigOverrides {
    pub fn apply(self, mut base: SessionConfig) -> SessionConfig {
        if let Some(v) = self.max_steps {
            base.max_steps = v;
        }
        if let Some(v) = self.margin {
            base.margin = v;
        }
        if let Some(v) = self.visual_prompting {
            base.visual_prompting = v;
        }
        if let Some(v) = self.collision_check {
            base.collision_check = v;
        }
        if let Some(v) = self.gateway {
            base.gateway = v;
        }
        if let Some(v) = self.assets {
            base.assets = v;
        }
        if let Some(v) = self.width {
            base.width = v;
        }
        if let Some(v) = self.height {
            base.height = v;
        }
        base
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionDescriptor {
    pub id: String,
    pub instruction: String,
    pub status: SessionStatus,
    pub step: u32,
    pub budget: u32,
    pub created_at: u64,
}

impl From<&SessionSnapshot> for SessionDescriptor {
    fn from(s: &SessionSnapshot) -> Self {
        Self {
            id: s.id.clone(),
            instruction: s.instruction.clone(),
            status: s.status,
            step: s.step,
            budget: s.budget,
            created_at: s.created_at,
        }
    }
}

/// One entry of a session's event stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub session_id: String,
    pub seq: u64,
    #[serde(flatten)]
    pub event: SessionEvent,
}

/// Ordered, persisted event log with live fan-out.
struct EventLog {
    session_id: String,
    path: PathBuf,
    records: Mutex<Vec<EventRecord>>,
    tx: broadcast::Sender<EventRecord>,
}

impl EventLog {
    fn open(session_id: &str, dir: &Path) -> Result<Self, ServiceError> {
        let path = dir.join(EVENTS_FILE);
        let records = if path.exists() {
            let text = fs::read_to_string(&path).map_err(|e| ServiceError::Internal(e.to_string()))?;
            text.lines()
                .filter(|l| !l.trim().is_empty())
                .map(serde_json::from_str)
                .collect::<Result<Vec<EventRecord>, _>>()
                .map_err(|e| ServiceError::Internal(format!("{}: {e}", path.display())))?
        } else {
            Vec::new()
        };
        Ok(Self {
            session_id: session_id.to_string(),
            path,
            records: Mutex::new(records),
            tx: broadcast::channel(BROADCAST_CAPACITY).0,
        })
    }

    fn push(&self, event: SessionEvent) {
        let mut records = self.records.lock().unwrap();
        let record = EventRecord {
            session_id: self.session_id.clone(),
            seq: records.len() as u64,
            event,
        };
        let line = serde_json::to_string(&record).expect("events serialize");
        let written = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .and_then(|mut f| writeln!(f, "{line}"));
        if let Err(e) = written {
            tracing::error!(session = %self.session_id, "cannot append event: {e}");
        }
        records.push(record.clone());
        let _ = self.tx.send(record);
    }

    /// Stored events from `from` on, plus a receiver for everything after them.
    fn subscribe(&self, from: u64) -> (Vec<EventRecord>, broadcast::Receiver<EventRecord>) {
        let records = self.records.lock().unwrap();
        let rx = self.tx.subscribe();
        (records.iter().skip(from as usize).cloned().collect(), rx)
    }

    fn len(&self) -> u64 {
        self.records.lock().unwrap().len() as u64
    }
}

struct SessionHandle {
    session: Mutex<Session>,
    snapshot: RwLock<SessionSnapshot>,
    events: EventLog,
    looping: AtomicBool,
    /// Callers waiting for the session lock; the loop steps aside for them between steps.
    waiters: AtomicUsize,
}

impl SessionHandle {
    fn with_session<T>(&self, f: impl FnOnce(&mut Session, &mut dyn FnMut(SessionEvent)) -> T) -> T {
        self.waiters.fetch_add(1, Ordering::SeqCst);
        let mut session = self.session.lock().unwrap();
        self.waiters.fetch_sub(1, Ordering::SeqCst);
        let out = f(&mut session, &mut |e| self.events.push(e));
        *self.snapshot.write().unwrap() = session.snapshot();
        out
    }

    fn snapshot(&self) -> SessionSnapshot {
        self.snapshot.read().unwrap().clone()
    }
}

fn ensure_loop(handle: &Arc<SessionHandle>) {
    if handle.looping.swap(true, Ordering::SeqCst) {
        return;
    }
    let h = handle.clone();
    let name = format!("session-{}", h.snapshot().id);
    thread::Builder::new()
        .name(name)
        .spawn(move || run_loop(&h))
        .expect("spawn session thread");
}

fn run_loop(h: &SessionHandle) {
    loop {
        while h.waiters.load(Ordering::SeqCst) > 0 {
            thread::sleep(Duration::from_millis(1));
        }
        let mut session = h.session.lock().unwrap();
        if session.status() != SessionStatus::Running {
            h.looping.store(false, Ordering::SeqCst);
            return;
        }
        let result = session.step(&mut |e| h.events.push(e));
        *h.snapshot.write().unwrap() = session.snapshot();
        if let Err(e) = result {
            tracing::error!(session = %session.id(), "step failed: {e}");
            h.looping.store(false, Ordering::SeqCst);
            return;
        }
    }
}

/// Hosts sessions under `root/<id>/`.
pub struct SessionManager {
    root: PathBuf,
    defaults: SessionConfig,
    sessions: RwLock<BTreeMap<String, Arc<SessionHandle>>>,
}

impl SessionManager {
    /// Opens `root`, reloading every session found there. Running and paused
    /// sessions are resumed.
    pub fn open(root: impl Into<PathBuf>, defaults: SessionConfig) -> Result<Arc<Self>, ServiceError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| ServiceError::Internal(e.to_string()))?;
        let manager = Arc::new(Self {
            root,
            defaults,
            sessions: RwLock::new(BTreeMap::new()),
        });
        let mut dirs: Vec<PathBuf> = fs::read_dir(&manager.root)
            .map_err(|e| ServiceError::Internal(e.to_string()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join("session.json").exists())
            .collect();
        dirs.sort();
        for dir in dirs {
            let session = match Session::load(&dir) {
                Ok(s) => s,
                Err(e) => {
                    tracing::warn!("skipping {}: {e}", dir.display());
                    continue;
                }
            };
            let id = session.id().to_string();
            let handle = manager.insert(session, &dir)?;
            if handle.snapshot().status == SessionStatus::Paused {
                handle.with_session(|s, sink| s.resume(sink))?;
            }
            if handle.snapshot().status == SessionStatus::Running {
                tracing::info!(session = %id, "resuming");
                ensure_loop(&handle);
            }
        }
        Ok(manager)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn insert(&self, session: Session, dir: &Path) -> Result<Arc<SessionHandle>, ServiceError> {
        let id = session.id().to_string();
        let handle = Arc::new(SessionHandle {
            snapshot: RwLock::new(session.snapshot()),
            events: EventLog::open(&id, dir)?,
            session: Mutex::new(session),
            looping: AtomicBool::new(false),
            waiters: AtomicUsize::new(0),
        });
        self.sessions.write().unwrap().insert(id, handle.clone());
        Ok(handle)
    }

    fn get(&self, id: &str) -> Result<Arc<SessionHandle>, ServiceError> {
        self.sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(id.to_string()))
    }

    pub fn create(&self, instruction: &str, overrides: ConfigOverrides) -> Result<SessionDescriptor, ServiceError> {
        let config = overrides.apply(self.defaults.clone());
        let id = uuid::Uuid::new_v4().simple().to_string();
        let dir = self.root.join(&id);
        let session = Session::new(&id, instruction, config, Some(dir.clone()))?;
        let handle = self.insert(session, &dir)?;
        handle.events.push(SessionEvent::StatusChanged {
            status: SessionStatus::Running,
            step: 0,
            detail: None,
        });
        ensure_loop(&handle);
        Ok(SessionDescriptor::from(&handle.snapshot()))
    }

    pub fn list(&self) -> Vec<SessionDescriptor> {
        let sessions = self.sessions.read().unwrap();
        let mut out: Vec<_> = sessions.values().map(|h| SessionDescriptor::from(&h.snapshot())).collect();
        out.sort_by(|a, b| a.created_at.cmp(&b.created_at).then_with(|| a.id.cmp(&b.id)));
        out
    }

    /// Latest state at a step boundary.
    pub fn snapshot(&self, id: &str) -> Result<SessionSnapshot, ServiceError> {
        Ok(self.get(id)?.snapshot())
    }

    /// Queues a user edit; returns the step that will carry it. Waits for a running step to end.
    pub fn post_message(&self, id: &str, text: &str) -> Result<u32, ServiceError> {
        let handle = self.get(id)?;
        let delivery = handle.with_session(|s, sink| s.inject_user_message(text, sink))?;
        if handle.snapshot().status == SessionStatus::Running {
            ensure_loop(&handle);
        }
        Ok(delivery)
    }

    pub fn abort(&self, id: &str) -> Result<SessionDescriptor, ServiceError> {
        let handle = self.get(id)?;
        handle.with_session(|s, sink| s.abort(sink))?;
        Ok(SessionDescriptor::from(&handle.snapshot()))
    }

    /// PNG bytes of the render shown to the agent at step `t`.
    pub fn step_image(&self, id: &str, t: u32) -> Result<Vec<u8>, ServiceError> {
        self.get(id)?;
        let path = self.root.join(id).join(sceneloom_core::agent::step_image_ref(t));
        fs::read(&path).map_err(|_| ServiceError::NotFound(format!("{id}/steps/{t}")))
    }

    pub fn subscribe(&self, id: &str, from: u64) -> Result<(Vec<EventRecord>, broadcast::Receiver<EventRecord>), ServiceError> {
        Ok(self.get(id)?.events.subscribe(from))
    }

    pub fn event_count(&self, id: &str) -> Result<u64, ServiceError> {
        Ok(self.get(id)?.events.len())
    }

    /// Blocks until the session leaves the running state or `timeout` passes.
    pub fn wait_idle(&self, id: &str, timeout: Duration) -> Result<SessionSnapshot, ServiceError> {
        let handle = self.get(id)?;
        let deadline = std::time::Instant::now() + timeout;
        loop {
            let snap = handle.snapshot();
            let idle = snap.status != SessionStatus::Running && !handle.looping.load(Ordering::SeqCst);
            if idle || std::time::Instant::now() >= deadline {
                return Ok(snap);
            }
            thread::sleep(Duration::from_millis(5));
        }
    }
}
