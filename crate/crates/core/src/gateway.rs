//! Transport to the multimodal model, plus offline stand-ins.

use std::time::Duration;

use base64::Engine as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::action::{Action, ActionBatch};

pub const VLM_ENDPOINT_ENV: &str = "SCENELOOM_VLM_ENDPOINT";
pub const VLM_TOKEN_ENV: &str = "SCENELOOM_VLM_TOKEN";
pub const VLM_MODEL_ENV: &str = "SCENELOOM_VLM_MODEL";
pub const MAX_RETRIES: u32 = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Part {
    Text(String),
    /// PNG bytes.
    Image(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatMessage {
    pub role: Role,
    pub parts: Vec<Part>,
}

impl ChatMessage {
    pub fn system(text: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            parts: vec![Part::Text(text.into())],
        }
    }

    pub fn text(&self) -> String {
        self.parts
            .iter()
            .filter_map(|p| match p {
                Part::Text(t) => Some(t.as_str()),
                Part::Image(_) => None,
            })
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn image_count(&self) -> usize {
        self.parts.iter().filter(|p| matches!(p, Part::Image(_))).count()
    }
}

/// Everything a gateway sees for one completion.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest {
    pub messages: Vec<ChatMessage>,
    /// 1-based step the completion is for.
    pub step: u32,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GatewayError {
    #[error("model endpoint unreachable: {0}")]
    Unreachable(String),
    #[error("model endpoint rejected credentials (HTTP {0})")]
    AuthFailure(u16),
    #[error("replay responses exhausted after {0}")]
    ReplayExhausted(usize),
    #[error("unexpected model response: {0}")]
    BadResponse(String),
    #[error("invalid gateway configuration: {0}")]
    Config(String),
}

pub trait Gateway: Send {
    fn complete(&mut self, request: &CompletionRequest) -> Result<String, GatewayError>;
}

/// Returns recorded responses strictly in order.
#[derive(Debug, Clone)]
pub struct ReplayGateway {
    responses: Vec<String>,
    cursor: usize,
}

impl ReplayGateway {
    pub fn new(responses: Vec<String>) -> Self {
        Self { responses, cursor: 0 }
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn set_cursor(&mut self, cursor: usize) {
        self.cursor = cursor;
    }
}

impl Gateway for ReplayGateway {
    fn complete(&mut self, _: &CompletionRequest) -> Result<String, GatewayError> {
        let r = self
            .responses
            .get(self.cursor)
            .cloned()
            .ok_or(GatewayError::ReplayExhausted(self.responses.len()))?;
        self.cursor += 1;
        Ok(r)
    }
}

/// Built-in rule-based policies. Output depends only on the step number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptPolicy {
    /// Creates `count` objects, lays them out on a grid, frames the scene, then finishes.
    GridLayout { count: usize },
    /// Creates one object, then nudges it back and forth forever.
    NeverFinish,
}

pub const DEFAULT_GRID_COUNT: usize = 4;
pub const GRID_SPACING: f64 = 1.5;
const GRID_DESCRIPTIONS: [&str; 6] = [
    "a wooden chair",
    "a small round table",
    "a floor lamp",
    "a potted plant",
    "a bookshelf",
    "a ceramic vase",
];

impl std::str::FromStr for ScriptPolicy {
    type Err = GatewayError;

    /// `grid-layout`, `grid-layout:<n>` or `never-finish`.
    fn from_str(s: &str) -> Result<Self, GatewayError> {
        let bad = || GatewayError::Config(format!("unknown scripted policy {s:?}"));
        match s.split_once(':') {
            None if s == "grid-layout" => Ok(ScriptPolicy::GridLayout {
                count: DEFAULT_GRID_COUNT,
            }),
            None if s == "never-finish" => Ok(ScriptPolicy::NeverFinish),
            Some(("grid-layout", n)) => match n.parse::<usize>() {
                Ok(count) if count >= 1 => Ok(ScriptPolicy::GridLayout { count }),
                _ => Err(bad()),
            },
            _ => Err(bad()),
        }
    }
}

impl std::fmt::Display for ScriptPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScriptPolicy::GridLayout { count } => write!(f, "grid-layout:{count}"),
            ScriptPolicy::NeverFinish => f.write_str("never-finish"),
        }
    }
}

fn grid_name(i: usize) -> String {
    format!("item_{}", i + 1)
}

/// Planned grid position of the `i`-th of `count` objects, centered on the origin.
pub fn grid_position(i: usize, count: usize) -> [f64; 3] {
    let cols = (count as f64).sqrt().ceil() as usize;
    let rows = count.div_ceil(cols);
    let (r, c) = (i / cols, i % cols);
    let x = (c as f64 - (cols as f64 - 1.0) / 2.0) * GRID_SPACING;
    let y = (r as f64 - (rows as f64 - 1.0) / 2.0) * GRID_SPACING;
    [x, y, 0.0]
}

impl ScriptPolicy {
    /// Every batch the grid policy emits, in order.
    fn grid_plan(count: usize) -> Vec<ActionBatch> {
        let mut plan = Vec::new();
        let indices: Vec<usize> = (0..count).collect();
        for chunk in indices.chunks(3) {
            plan.push(ActionBatch {
                reason: format!("Create objects {} to {}.", chunk[0] + 1, chunk[chunk.len() - 1] + 1),
                actions: chunk
                    .iter()
                    .map(|&i| Action::Create {
                        name: grid_name(i),
                        description: GRID_DESCRIPTIONS[i % GRID_DESCRIPTIONS.len()].to_string(),
                    })
                    .collect(),
            });
        }
        for chunk in indices.chunks(3) {
            plan.push(ActionBatch {
                reason: "Spread the stacked objects onto a grid.".into(),
                actions: chunk
                    .iter()
                    .map(|&i| Action::Place {
                        name: grid_name(i),
                        position: grid_position(i, count),
                    })
                    .collect(),
            });
        }
        plan.push(ActionBatch {
            reason: "Frame the whole layout to check it.".into(),
            actions: vec![Action::ViewScene {
                view: "Iso".into(),
                zoom: 1.2,
            }],
        });
        plan.push(ActionBatch {
            reason: "Every object is placed on the grid.".into(),
            actions: vec![Action::Finish],
        });
        plan
    }

    pub fn batch_for_step(&self, step: u32) -> ActionBatch {
        let i = step.saturating_sub(1) as usize;
        match self {
            ScriptPolicy::GridLayout { count } => {
                let plan = Self::grid_plan(*count);
                plan.get(i).cloned().unwrap_or_else(|| plan[plan.len() - 1].clone())
            }
            ScriptPolicy::NeverFinish if i == 0 => ActionBatch {
                reason: "Start with a single object.".into(),
                actions: vec![Action::Create {
                    name: "probe".into(),
                    description: "a small wooden crate".into(),
                }],
            },
            ScriptPolicy::NeverFinish => ActionBatch {
                reason: "Nudge the object again.".into(),
                actions: vec![Action::Translate {
                    name: "probe".into(),
                    axis: "X".into(),
                    distance: if i % 2 == 1 { 0.1 } else { -0.1 },
                }],
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScriptedGateway {
    policy: ScriptPolicy,
}

impl ScriptedGateway {
    pub fn new(policy: ScriptPolicy) -> Self {
        Self { policy }
    }
}

impl Gateway for ScriptedGateway {
    fn complete(&mut self, request: &CompletionRequest) -> Result<String, GatewayError> {
        Ok(self.policy.batch_for_step(request.step).to_response_text())
    }
}

/// Retry schedule for transient remote failures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Backoff {
    pub initial: Duration,
    pub factor: u32,
}

impl Default for Backoff {
    fn default() -> Self {
        Self {
            initial: Duration::from_millis(500),
            factor: 2,
        }
    }
}

/// Chat-completions client. The token is read from the environment at
/// construction and never serialized.
pub struct RemoteGateway {
    endpoint: String,
    model: String,
    token: Option<String>,
    client: reqwest::blocking::Client,
    backoff: Backoff,
}

impl RemoteGateway {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, token: Option<String>, timeout: Duration) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| GatewayError::Config(e.to_string()))?;
        Ok(Self {
            endpoint: endpoint.into(),
            model: model.into(),
            token,
            client,
            backoff: Backoff::default(),
        })
    }

    pub fn with_backoff(mut self, backoff: Backoff) -> Self {
        self.backoff = backoff;
        self
    }

    fn attempt(&self, body: &Value) -> Result<String, (bool, GatewayError)> {
        let mut req = self.client.post(&self.endpoint).json(body);
        if let Some(token) = &self.token {
            req = req.bearer_auth(token);
        }
        let resp = req.send().map_err(|e| (true, GatewayError::Unreachable(e.to_string())))?;
        let status = resp.status();
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Err((false, GatewayError::AuthFailure(status.as_u16())));
        }
        if status.is_server_error() || status.as_u16() == 429 {
            return Err((true, GatewayError::Unreachable(format!("HTTP {status}"))));
        }
        if !status.is_success() {
            return Err((false, GatewayError::BadResponse(format!("HTTP {status}"))));
        }
        let value: Value = resp
            .json()
            .map_err(|e| (false, GatewayError::BadResponse(e.to_string())))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| (false, GatewayError::BadResponse("missing choices[0].message.content".into())))
    }
}

/// Request body in chat-completions form; images travel as base64 PNG data URLs.
pub fn request_body(model: &str, messages: &[ChatMessage]) -> Value {
    let messages: Vec<Value> = messages
        .iter()
        .map(|m| {
            let content: Vec<Value> = m
                .parts
                .iter()
                .map(|p| match p {
                    Part::Text(t) => json!({ "type": "text", "text": t }),
                    Part::Image(png) => json!({
                        "type": "image_url",
                        "image_url": {
                            "url": format!(
                                "data:image/png;base64,{}",
                                base64::engine::general_purpose::STANDARD.encode(png)
                            )
                        }
                    }),
                })
                .collect();
            json!({ "role": m.role, "content": content })
        })
        .collect();
    json!({ "model": model, "messages": messages })
}

impl Gateway for RemoteGateway {
    fn complete(&mut self, request: &CompletionRequest) -> Result<String, GatewayError> {
        let body = request_body(&self.model, &request.messages);
        let mut delay = self.backoff.initial;
        let mut retries = 0;
        loop {
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err((true, _)) if retries < MAX_RETRIES => {
                    std::thread::sleep(delay);
                    delay *= self.backoff.factor;
                    retries += 1;
                }
                Err((_, e)) => return Err(e),
            }
        }
    }
}

/// Serializable gateway selection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GatewayKind {
    Remote {
        endpoint: String,
        model: String,
        /// Name of the environment variable holding the bearer token.
        token_env: String,
    },
    Replay { responses: Vec<String> },
    Scripted { policy: String },
}

pub const DEFAULT_REMOTE_TIMEOUT: Duration = Duration::from_secs(300);

impl GatewayKind {
    /// Remote settings taken from the environment.
    pub fn remote_from_env() -> Result<Self, GatewayError> {
        let endpoint = std::env::var(VLM_ENDPOINT_ENV)
            .map_err(|_| GatewayError::Config(format!("{VLM_ENDPOINT_ENV} is not set")))?;
        Ok(GatewayKind::Remote {
            endpoint,
            model: std::env::var(VLM_MODEL_ENV).unwrap_or_else(|_| "default".into()),
            token_env: VLM_TOKEN_ENV.into(),
        })
    }

    /// Builds a gateway positioned after `consumed` earlier completions.
    pub fn build(&self, consumed: usize) -> Result<Box<dyn Gateway>, GatewayError> {
        Ok(match self {
            GatewayKind::Remote {
                endpoint,
                model,
                token_env,
            } => Box::new(RemoteGateway::new(
                endpoint.clone(),
                model.clone(),
                std::env::var(token_env).ok(),
                DEFAULT_REMOTE_TIMEOUT,
            )?),
            GatewayKind::Replay { responses } => {
                let mut g = ReplayGateway::new(responses.clone());
                g.set_cursor(consumed);
                Box::new(g)
            }
            GatewayKind::Scripted { policy } => Box::new(ScriptedGateway::new(policy.parse()?)),
        })
    }
}
