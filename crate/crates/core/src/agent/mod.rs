//! The closed feedback loop: render, prompt, complete, parse, validate, execute.

mod prompt;
pub mod replay;

pub use prompt::{
    assemble_prompt, format_system_messages, summarize_actions, user_prompt_text, HistoryEntry, SystemMessage,
    SYSTEM_PROMPT, USER_PROMPT_TEMPLATE,
};

use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::action::{execute_batch, parse_response, validate_batch, Action, ActionBatch, MessageOrigin, ValidationVerdict};
use crate::assets::{AssetError, AssetProvider, ProviderKind};
use crate::camera::{view_scene, CameraState, View};
use crate::collision::{detect_collisions, DEFAULT_MARGIN};
use crate::gateway::{CompletionRequest, Gateway, GatewayError, GatewayKind};
use crate::geometry::mesh::hex_digest;
use crate::render::{render, RenderError, RenderOptions, MIN_SIZE};
use crate::scene::{Scene, SceneError, SceneSummary};

pub const DEFAULT_MAX_STEPS: u32 = 20;
pub const GENESIS_HASH: &str = "0000000000000000000000000000000000000000000000000000000000000000";

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error("instruction must not be empty")]
    EmptyInstruction,
    #[error("message must not be empty")]
    EmptyMessage,
    #[error("invalid session config: {0}")]
    BadConfig(String),
    #[error("session was aborted")]
    SessionAborted,
    #[error("session is {0}, not running")]
    NotRunning(SessionStatus),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Asset(#[from] AssetError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error("session file: {0}")]
    Io(#[from] std::io::Error),
    #[error("session file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub max_steps: u32,
    pub margin: f64,
    pub visual_prompting: bool,
    pub collision_check: bool,
    pub gateway: GatewayKind,
    pub assets: ProviderKind,
    pub width: u32,
    pub height: u32,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            max_steps: DEFAULT_MAX_STEPS,
            margin: DEFAULT_MARGIN,
            visual_prompting: true,
            collision_check: true,
            gateway: GatewayKind::Scripted {
                policy: "grid-layout".into(),
            },
            assets: ProviderKind::Procedural,
            width: crate::render::DEFAULT_WIDTH,
            height: crate::render::DEFAULT_HEIGHT,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        if self.max_steps == 0 {
            return Err(AgentError::BadConfig("max_steps must be at least 1".into()));
        }
        if !(self.margin.is_finite() && (0.0..1.0).contains(&self.margin)) {
            return Err(AgentError::BadConfig(format!("margin must be in [0, 1), got {}", self.margin)));
        }
        if self.width < MIN_SIZE || self.height < MIN_SIZE {
            return Err(AgentError::BadConfig(format!("image size must be at least {MIN_SIZE}px")));
        }
        if let GatewayKind::Scripted { policy } = &self.gateway {
            policy
                .parse::<crate::gateway::ScriptPolicy>()
                .map_err(|e| AgentError::BadConfig(e.to_string()))?;
        }
        Ok(())
    }

    fn render_options(&self) -> RenderOptions {
        RenderOptions {
            width: self.width,
            height: self.height,
            visual_prompting: self.visual_prompting,
            ..RenderOptions::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionStatus {
    Running,
    Paused,
    Finished,
    Exhausted,
    Aborted,
}

impl SessionStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, SessionStatus::Finished | SessionStatus::Exhausted | SessionStatus::Aborted)
    }
}

impl std::fmt::Display for SessionStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SessionStatus::Running => "running",
            SessionStatus::Paused => "paused",
            SessionStatus::Finished => "finished",
            SessionStatus::Exhausted => "exhausted",
            SessionStatus::Aborted => "aborted",
        })
    }
}

/// One line of `trajectory.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub step: u32,
    pub image_ref: String,
    pub image_sha256: String,
    pub camera: CameraState,
    /// Text of the user message; the system prompt is constant.
    pub prompt: String,
    pub delivered_messages: Vec<SystemMessage>,
    pub raw_response: String,
    pub batch: Option<ActionBatch>,
    pub parse_error: Option<String>,
    pub verdict: Option<ValidationVerdict>,
    pub executed: Vec<Action>,
    pub emitted_messages: Vec<SystemMessage>,
    /// Mesh ref of every object created in this step, by name.
    pub created_meshes: Vec<(String, String)>,
    pub floor_texture_ref: Option<String>,
    pub scene_summary: SceneSummary,
    pub scene_hash: String,
    pub prev_hash: String,
    pub step_hash: String,
}

impl TrajectoryStep {
    /// Hash over `prev_hash` and the record with an empty `step_hash`.
    pub fn compute_hash(&self) -> String {
        let mut unsealed = self.clone();
        unsealed.step_hash.clear();
        let body = serde_json::to_string(&unsealed).expect("trajectory steps serialize");
        hex_digest(format!("{}{}", self.prev_hash, body).as_bytes())
    }
}

/// Checks that each record links to its predecessor and that its own hash matches.
pub fn verify_chain(steps: &[TrajectoryStep]) -> Result<(), String> {
    let mut prev = GENESIS_HASH.to_string();
    for (i, s) in steps.iter().enumerate() {
        if s.step as usize != i + 1 {
            return Err(format!("record {} has step {}", i + 1, s.step));
        }
        if s.prev_hash != prev {
            return Err(format!("step {} does not link to its predecessor", s.step));
        }
        if s.compute_hash() != s.step_hash {
            return Err(format!("step {} hash mismatch", s.step));
        }
        prev = s.step_hash.clone();
    }
    Ok(())
}

pub fn read_trajectory(path: &Path) -> Result<Vec<TrajectoryStep>, AgentError> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| AgentError::Format(e.to_string())))
        .collect()
}

/// Progress notifications emitted while a step runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SessionEvent {
    StepStarted { step: u32 },
    ImageReady { step: u32, image_ref: String },
    ResponseReceived { step: u32, reason: String, raw_response: String },
    BatchExecuted { step: u32, actions: Vec<Action>, warnings: Vec<String> },
    BatchRejected { step: u32, reason: String },
    SystemMessage { message: SystemMessage },
    StatusChanged { status: SessionStatus, step: u32, detail: Option<String> },
}

/// Persisted session state (`session.json`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub id: String,
    pub instruction: String,
    pub config: SessionConfig,
    pub status: SessionStatus,
    pub step: u32,
    pub budget: u32,
    pub camera: CameraState,
    pub pending: Vec<SystemMessage>,
    pub history: Vec<HistoryEntry>,
    pub last_hash: String,
    pub created_at: u64,
    pub status_detail: Option<String>,
}

/// Read-only view of a session between steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub id: String,
    pub instruction: String,
    pub status: SessionStatus,
    pub status_detail: Option<String>,
    pub step: u32,
    pub budget: u32,
    pub max_steps: u32,
    pub created_at: u64,
    pub latest_image: Option<String>,
    pub last_hash: String,
    pub camera: CameraState,
    pub scene: SceneSummary,
    pub history: Vec<HistoryEntry>,
    pub pending_messages: Vec<SystemMessage>,
}

pub struct Session {
    record: SessionRecord,
    scene: Scene,
    gateway: Box<dyn Gateway>,
    provider: Box<dyn AssetProvider>,
    dir: Option<PathBuf>,
}

fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn step_image_ref(step: u32) -> String {
    format!("steps/step_{step}.png")
}

impl Session {
    /// New running session. With `dir`, state is persisted there after every step.
    pub fn new(id: impl Into<String>, instruction: impl Into<String>, config: SessionConfig, dir: Option<PathBuf>) -> Result<Session, AgentError> {
        let instruction = instruction.into();
        if instruction.trim().is_empty() {
            return Err(AgentError::EmptyInstruction);
        }
        config.validate()?;
        let gateway = config.gateway.build(0)?;
        let provider = config.assets.build()?;
        let scene = Scene::new();
        let camera = view_scene(&scene, View::Iso, 1.0).expect("unit zoom is valid");
        let record = SessionRecord {
            id: id.into(),
            instruction,
            budget: config.max_steps,
            config,
            status: SessionStatus::Running,
            step: 0,
            camera,
            pending: Vec::new(),
            history: Vec::new(),
            last_hash: GENESIS_HASH.to_string(),
            created_at: unix_now(),
            status_detail: None,
        };
        let session = Session {
            record,
            scene,
            gateway,
            provider,
            dir,
        };
        session.persist()?;
        Ok(session)
    }

    /// Swaps in a custom gateway, e.g. a test double.
    pub fn with_gateway(mut self, gateway: Box<dyn Gateway>) -> Self {
        self.gateway = gateway;
        self
    }

    pub fn with_provider(mut self, provider: Box<dyn AssetProvider>) -> Self {
        self.provider = provider;
        self
    }

    /// Restores a session from its directory; the gateway resumes after the completed steps.
    pub fn load(dir: &Path) -> Result<Session, AgentError> {
        let text = fs::read_to_string(dir.join("session.json"))?;
        let record: SessionRecord = serde_json::from_str(&text).map_err(|e| AgentError::Format(e.to_string()))?;
        let scene_path = dir.join("scene.json");
        let scene = if scene_path.exists() {
            Scene::load(&scene_path)?
        } else {
            Scene::new()
        };
        let gateway = record.config.gateway.build(record.step as usize)?;
        let provider = record.config.assets.build()?;
        Ok(Session {
            record,
            scene,
            gateway,
            provider,
            dir: Some(dir.to_path_buf()),
        })
    }

    pub fn id(&self) -> &str {
        &self.record.id
    }

    pub fn record(&self) -> &SessionRecord {
        &self.record
    }

    pub fn status(&self) -> SessionStatus {
        self.record.status
    }

    pub fn step_count(&self) -> u32 {
        self.record.step
    }

    pub fn budget(&self) -> u32 {
        self.record.budget
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn camera(&self) -> &CameraState {
        &self.record.camera
    }

    pub fn pending(&self) -> &[SystemMessage] {
        &self.record.pending
    }

    pub fn history(&self) -> &[HistoryEntry] {
        &self.record.history
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn snapshot(&self) -> SessionSnapshot {
        let r = &self.record;
        SessionSnapshot {
            id: r.id.clone(),
            instruction: r.instruction.clone(),
            status: r.status,
            status_detail: r.status_detail.clone(),
            step: r.step,
            budget: r.budget,
            max_steps: r.config.max_steps,
            created_at: r.created_at,
            latest_image: (r.step > 0).then(|| step_image_ref(r.step)),
            last_hash: r.last_hash.clone(),
            camera: r.camera,
            scene: self.scene.summary(),
            history: r.history.clone(),
            pending_messages: r.pending.clone(),
        }
    }

    /// Renders the scene the way the next step will see it.
    pub fn render_current(&self) -> Result<Vec<u8>, AgentError> {
        Ok(render(&self.scene, &self.record.camera, &self.record.config.render_options())?.to_png())
    }

    fn set_status(&mut self, status: SessionStatus, detail: Option<String>, sink: &mut dyn FnMut(SessionEvent)) {
        self.record.status = status;
        self.record.status_detail = detail.clone();
        sink(SessionEvent::StatusChanged {
            status,
            step: self.record.step,
            detail,
        });
    }

    fn enqueue(&mut self, origin: MessageOrigin, text: String, step: u32, emitted: &mut Vec<SystemMessage>) {
        let m = SystemMessage {
            origin,
            text,
            created_at_step: step,
        };
        self.record.pending.push(m.clone());
        emitted.push(m);
    }

    /// Queues a user edit for the next prompt. Returns the step that will carry it.
    /// Finished or exhausted sessions are re-opened with half the original budget added.
    pub fn inject_user_message(&mut self, text: &str, sink: &mut dyn FnMut(SessionEvent)) -> Result<u32, AgentError> {
        if text.trim().is_empty() {
            return Err(AgentError::EmptyMessage);
        }
        let r = &mut self.record;
        match r.status {
            SessionStatus::Aborted => return Err(AgentError::SessionAborted),
            SessionStatus::Finished | SessionStatus::Exhausted => {
                r.budget = r.budget.max(r.step + r.config.max_steps / 2);
            }
            SessionStatus::Running | SessionStatus::Paused => {}
        }
        let m = SystemMessage {
            origin: MessageOrigin::UserEdit,
            text: text.to_string(),
            created_at_step: r.step,
        };
        r.pending.push(m.clone());
        let delivery = r.step + 1;
        sink(SessionEvent::SystemMessage { message: m });
        if self.record.status != SessionStatus::Running {
            if self.record.step >= self.record.budget {
                // no room was added; the budget is already spent
                self.persist()?;
                return Ok(delivery);
            }
            self.set_status(SessionStatus::Running, None, sink);
        }
        self.persist()?;
        Ok(delivery)
    }

    pub fn abort(&mut self, sink: &mut dyn FnMut(SessionEvent)) -> Result<(), AgentError> {
        if self.record.status != SessionStatus::Aborted {
            self.set_status(SessionStatus::Aborted, None, sink);
            self.persist()?;
        }
        Ok(())
    }

    /// Puts a paused session back to running without adding a message.
    pub fn resume(&mut self, sink: &mut dyn FnMut(SessionEvent)) -> Result<(), AgentError> {
        if self.record.status == SessionStatus::Paused {
            self.set_status(SessionStatus::Running, None, sink);
            self.persist()?;
        }
        Ok(())
    }

    /// Runs one loop iteration.
    pub fn step(&mut self, sink: &mut dyn FnMut(SessionEvent)) -> Result<(), AgentError> {
        if self.record.status != SessionStatus::Running {
            return Err(AgentError::NotRunning(self.record.status));
        }
        if self.record.step >= self.record.budget {
            self.set_status(SessionStatus::Exhausted, None, sink);
            self.persist()?;
            return Ok(());
        }
        let t = self.record.step + 1;
        sink(SessionEvent::StepStarted { step: t });

        let camera = self.record.camera;
        let png = self.render_current()?;
        let image_ref = step_image_ref(t);
        if let Some(dir) = &self.dir {
            fs::create_dir_all(dir.join("steps"))?;
            fs::write(dir.join(&image_ref), &png)?;
        }
        sink(SessionEvent::ImageReady {
            step: t,
            image_ref: image_ref.clone(),
        });
        let image_sha256 = hex_digest(&png);

        let summary_before = self.scene.summary();
        let delivered = self.record.pending.clone();
        let messages = assemble_prompt(&self.record.instruction, &self.record.history, &summary_before, &delivered, png);
        let prompt_text = messages[1].text();
        let raw = match self.gateway.complete(&CompletionRequest { messages, step: t }) {
            Ok(raw) => raw,
            Err(e) => {
                // nothing consumed: the step is retried after resume
                self.set_status(SessionStatus::Paused, Some(e.to_string()), sink);
                self.persist()?;
                return Ok(());
            }
        };
        self.record.pending.clear();

        let mut emitted = Vec::new();
        let mut executed = Vec::new();
        let mut finished = false;
        let mut verdict = None;
        let mut created_meshes = Vec::new();
        let parsed = parse_response(&raw);
        sink(SessionEvent::ResponseReceived {
            step: t,
            reason: parsed.as_ref().map(|b| b.reason.clone()).unwrap_or_default(),
            raw_response: raw.clone(),
        });
        let history_entry = match &parsed {
            Err(e) => {
                let reason = format!("could not parse response: {e}");
                self.enqueue(MessageOrigin::ParseFailure, reason.clone(), t, &mut emitted);
                sink(SessionEvent::BatchRejected {
                    step: t,
                    reason: reason.clone(),
                });
                HistoryEntry {
                    step: t,
                    actions: Vec::new(),
                    rejected: Some(e.to_string()),
                }
            }
            Ok(batch) => {
                let v = validate_batch(batch, &self.scene);
                let entry = if let Some(reason) = v.rejection_reason.clone().filter(|_| !v.accepted) {
                    self.enqueue(
                        MessageOrigin::BatchRejected,
                        format!("The whole batch was rejected and nothing was executed: {reason}"),
                        t,
                        &mut emitted,
                    );
                    sink(SessionEvent::BatchRejected {
                        step: t,
                        reason: reason.clone(),
                    });
                    HistoryEntry {
                        step: t,
                        actions: batch.actions.clone(),
                        rejected: Some(reason),
                    }
                } else {
                    for w in &v.warnings {
                        self.enqueue(MessageOrigin::Warning, w.clone(), t, &mut emitted);
                    }
                    let outcome = execute_batch(&mut self.scene, &mut self.record.camera, batch, self.provider.as_ref());
                    for n in outcome.messages {
                        self.enqueue(n.origin, n.text, t, &mut emitted);
                    }
                    for a in &outcome.executed {
                        if let Action::Create { name, .. } = a {
                            if let Ok(o) = self.scene.get(name) {
                                created_meshes.push((name.clone(), o.mesh_ref().to_string()));
                            }
                        }
                    }
                    finished = outcome.finished;
                    executed = outcome.executed;
                    sink(SessionEvent::BatchExecuted {
                        step: t,
                        actions: executed.clone(),
                        warnings: v.warnings.clone(),
                    });
                    HistoryEntry {
                        step: t,
                        actions: batch.actions.clone(),
                        rejected: None,
                    }
                };
                verdict = Some(v);
                entry
            }
        };

        if self.record.config.collision_check && !finished {
            let pairs = detect_collisions(&self.scene, self.record.config.margin);
            if !pairs.is_empty() {
                let list = pairs
                    .iter()
                    .map(|(a, b)| format!("\"{a}\" and \"{b}\""))
                    .collect::<Vec<_>>()
                    .join("; ");
                self.enqueue(
                    MessageOrigin::Collision,
                    format!("Collision detected between {list}. Move them apart so they do not intersect."),
                    t,
                    &mut emitted,
                );
            }
        }
        for m in &emitted {
            sink(SessionEvent::SystemMessage { message: m.clone() });
        }

        let texture_after = self.scene.floor_texture.as_ref().map(|f| f.reference.clone());
        let textured = executed.iter().any(|a| matches!(a, Action::GenerateFloorTexture { .. }));
        let mut record = TrajectoryStep {
            step: t,
            image_ref,
            image_sha256,
            camera,
            prompt: prompt_text,
            delivered_messages: delivered,
            raw_response: raw,
            batch: parsed.as_ref().ok().cloned(),
            parse_error: parsed.as_ref().err().map(|e| e.to_string()),
            verdict,
            executed,
            emitted_messages: emitted,
            created_meshes,
            floor_texture_ref: texture_after.filter(|_| textured),
            scene_summary: self.scene.summary(),
            scene_hash: self.scene.content_hash(),
            prev_hash: self.record.last_hash.clone(),
            step_hash: String::new(),
        };
        record.step_hash = record.compute_hash();

        self.record.history.push(history_entry);
        self.record.step = t;
        self.record.last_hash = record.step_hash.clone();
        if let Some(dir) = &self.dir {
            self.scene.save(dir)?;
            let mut f = OpenOptions::new().create(true).append(true).open(dir.join("trajectory.jsonl"))?;
            writeln!(f, "{}", serde_json::to_string(&record).map_err(|e| AgentError::Format(e.to_string()))?)?;
        }
        if finished {
            self.set_status(SessionStatus::Finished, None, sink);
        } else if t >= self.record.budget {
            self.set_status(SessionStatus::Exhausted, None, sink);
        }
        self.persist()
    }

    /// Steps until the session stops running.
    pub fn run(&mut self, sink: &mut dyn FnMut(SessionEvent)) -> Result<SessionStatus, AgentError> {
        while self.record.status == SessionStatus::Running {
            self.step(sink)?;
        }
        Ok(self.record.status)
    }

    fn persist(&self) -> Result<(), AgentError> {
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        fs::create_dir_all(dir)?;
        if !dir.join("scene.json").exists() {
            self.scene.save(dir)?;
        }
        let text = serde_json::to_string_pretty(&self.record).map_err(|e| AgentError::Format(e.to_string()))?;
        let tmp = dir.join("session.json.tmp");
        fs::write(&tmp, text)?;
        fs::rename(tmp, dir.join("session.json"))?;
        Ok(())
    }
}
