//! Wire format. Every frame is one JSON object in a WebSocket text message,
//! carrying the protocol version `v` and a `type` tag.

use std::collections::BTreeMap;

use director_core::actuation::{Point, Resource};
use director_core::director::TaskName;
use director_core::llm::LlmDecision;
use director_core::simworld::{BallObservation, RobotPose, Scenario};
use serde::{Deserialize, Serialize};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub polls: u64,
    pub executable_polls: u64,
    pub skipped_polls: u64,
    pub kicks: u32,
}

/// Everything a console needs to draw one frame. All fields come from the
/// same point between reactions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub seq: u64,
    pub tick: u64,
    pub clock: f64,
    pub paused: bool,
    pub robot: RobotPose,
    pub ball: Point,
    pub fallen: bool,
    pub observation: BallObservation,
    pub goal: String,
    /// Running task -> resources it holds.
    pub assignment: BTreeMap<TaskName, Vec<Resource>>,
    pub last_decision: Option<LlmDecision>,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Command {
    SetGoal { text: String },
    PushOver,
    Pause,
    Resume,
    Reset {
        #[serde(default)]
        scenario: Option<Scenario>,
        #[serde(default)]
        seed: Option<u64>,
    },
}

impl Command {
    pub fn kind(&self) -> &'static str {
        match self {
            Command::SetGoal { .. } => "set_goal",
            Command::PushOver => "push_over",
            Command::Pause => "pause",
            Command::Resume => "resume",
            Command::Reset { .. } => "reset",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AckStatus {
    Applied,
    /// Received while paused; applied on resume.
    Queued,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Snapshot(Snapshot),
    Ack {
        id: Option<u64>,
        command: String,
        status: AckStatus,
    },
    Reject {
        id: Option<u64>,
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerFrame {
    pub v: u32,
    #[serde(flatten)]
    pub msg: ServerMessage,
}

impl ServerFrame {
    pub fn new(msg: ServerMessage) -> Self {
        ServerFrame { v: PROTOCOL_VERSION, msg }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server frames serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientFrame {
    pub v: u32,
    /// Echoed back in the ack or reject.
    #[serde(default)]
    pub id: Option<u64>,
    #[serde(flatten)]
    pub command: Command,
}

/// Parse and validate a client frame. Errors carry the rejection reason.
pub fn parse_client_frame(text: &str) -> Result<ClientFrame, (Option<u64>, String)> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| (None, format!("malformed frame: {e}")))?;
    let id = value.get("id").and_then(serde_json::Value::as_u64);
    let frame: ClientFrame = serde_json::from_value(value).map_err(|e| (id, format!("malformed frame: {e}")))?;
    if frame.v != PROTOCOL_VERSION {
        return Err((id, format!("unsupported protocol version {} (server speaks {PROTOCOL_VERSION})", frame.v)));
    }
    if let Command::SetGoal { text } = &frame.command {
        if text.trim().is_empty() {
            return Err((id, "set_goal text must not be empty".into()));
        }
    }
    Ok(frame)
}
