use serde::{Deserialize, Serialize};

use crate::action::{Action, MessageOrigin};
use crate::gateway::{ChatMessage, Part, Role};
use crate::scene::SceneSummary;

pub const SYSTEM_PROMPT: &str = include_str!("system_prompt.txt");
pub const USER_PROMPT_TEMPLATE: &str = include_str!("user_prompt.txt");

/// Engine-to-agent notification, shown once in the prompt after it was raised.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemMessage {
    pub origin: MessageOrigin,
    pub text: String,
    pub created_at_step: u32,
}

impl MessageOrigin {
    pub fn as_str(self) -> &'static str {
        match self {
            MessageOrigin::Collision => "collision",
            MessageOrigin::BatchRejected => "batch_rejected",
            MessageOrigin::ProviderFailure => "provider_failure",
            MessageOrigin::UserEdit => "user_edit",
            MessageOrigin::ParseFailure => "parse_failure",
            MessageOrigin::Warning => "warning",
        }
    }
}

/// What one step contributed to the action history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub step: u32,
    pub actions: Vec<Action>,
    /// Rejection or parse-failure reason; `None` when the batch ran.
    pub rejected: Option<String>,
}

pub fn summarize_actions(history: &[HistoryEntry]) -> String {
    if history.is_empty() {
        return "none yet".to_string();
    }
    history
        .iter()
        .map(|h| {
            let calls = if h.actions.is_empty() {
                "(no parsable actions)".to_string()
            } else {
                h.actions.iter().map(Action::to_string).collect::<Vec<_>>().join(", ")
            };
            match &h.rejected {
                Some(reason) => format!("Step {}: {calls} [rejected: {reason}]", h.step),
                None => format!("Step {}: {calls}", h.step),
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn format_system_messages(messages: &[SystemMessage]) -> String {
    if messages.is_empty() {
        return "none".to_string();
    }
    messages
        .iter()
        .map(|m| format!("- [{}] {}", m.origin.as_str(), m.text))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Fills the user template. Pure in its inputs.
pub fn user_prompt_text(instruction: &str, history: &[HistoryEntry], summary: &SceneSummary, pending: &[SystemMessage]) -> String {
    USER_PROMPT_TEMPLATE
        .replace("{user_instruction}", instruction)
        .replace("{action_summary}", &summarize_actions(history))
        .replace("{scene_json}", &summary.to_json())
        .replace("{system_messages}", &format_system_messages(pending))
}

/// System prompt plus one user message holding the current render and the filled template.
pub fn assemble_prompt(
    instruction: &str,
    history: &[HistoryEntry],
    summary: &SceneSummary,
    pending: &[SystemMessage],
    image_png: Vec<u8>,
) -> Vec<ChatMessage> {
    vec![
        ChatMessage::system(SYSTEM_PROMPT),
        ChatMessage {
            role: Role::User,
            parts: vec![
                Part::Image(image_png),
                Part::Text(user_prompt_text(instruction, history, summary, pending)),
            ],
        },
    ]
}
