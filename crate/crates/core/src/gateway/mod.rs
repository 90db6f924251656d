//! Wire protocol between pipeline components and external clients.
//!
//! Every frame on the socket is one JSON [`Envelope`]. Inbound envelopes are
//! routed to pipeline components by type; components answer with outbound
//! envelopes, some of which are routed again internally (observation to
//! classifier to debouncer to agent) before reaching observers.

mod host;
pub mod payload;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

pub use host::{Gateway, SessionEndpoint, SessionFactory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageType {
    SessionStart,
    SessionStop,
    FrameBatch,
    SceneObservation,
    ContextVerdict,
    DebounceDecision,
    NewInfoInjected,
    UserUtterance,
    AgentResponse,
    Silent,
    Trace,
    Error,
    Inject,
    Subscribe,
}

impl MessageType {
    pub const ALL: [MessageType; 14] = [
        MessageType::SessionStart,
        MessageType::SessionStop,
        MessageType::FrameBatch,
        MessageType::SceneObservation,
        MessageType::ContextVerdict,
        MessageType::DebounceDecision,
        MessageType::NewInfoInjected,
        MessageType::UserUtterance,
        MessageType::AgentResponse,
        MessageType::Silent,
        MessageType::Trace,
        MessageType::Error,
        MessageType::Inject,
        MessageType::Subscribe,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MessageType::SessionStart => "session_start",
            MessageType::SessionStop => "session_stop",
            MessageType::FrameBatch => "frame_batch",
            MessageType::SceneObservation => "scene_observation",
            MessageType::ContextVerdict => "context_verdict",
            MessageType::DebounceDecision => "debounce_decision",
            MessageType::NewInfoInjected => "new_info_injected",
            MessageType::UserUtterance => "user_utterance",
            MessageType::AgentResponse => "agent_response",
            MessageType::Silent => "silent",
            MessageType::Trace => "trace",
            MessageType::Error => "error",
            MessageType::Inject => "inject",
            MessageType::Subscribe => "subscribe",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }

    /// Types a client may send.
    pub fn accepted_inbound(&self) -> bool {
        matches!(
            self,
            MessageType::SessionStart
                | MessageType::SessionStop
                | MessageType::FrameBatch
                | MessageType::UserUtterance
                | MessageType::Inject
                | MessageType::Subscribe
        )
    }
}

impl std::fmt::Display for MessageType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Envelope {
    #[serde(rename = "type")]
    pub kind: MessageType,
    pub session_id: String,
    #[serde(default)]
    pub seq: u64,
    #[serde(default)]
    pub ts_ms: u64,
    #[serde(default)]
    pub payload: Map<String, Value>,
}

impl Envelope {
    pub fn new(kind: MessageType, session_id: impl Into<String>, seq: u64, ts_ms: u64, payload: Map<String, Value>) -> Self {
        Self {
            kind,
            session_id: session_id.into(),
            seq,
            ts_ms,
            payload,
        }
    }

    /// Builds an envelope from any serializable payload struct.
    pub fn with_payload<P: Serialize>(
        kind: MessageType,
        session_id: impl Into<String>,
        seq: u64,
        ts_ms: u64,
        payload: &P,
    ) -> Self {
        let payload = match serde_json::to_value(payload).expect("payload serializes") {
            Value::Object(map) => map,
            other => {
                let mut map = Map::new();
                map.insert("value".into(), other);
                map
            }
        };
        Self::new(kind, session_id, seq, ts_ms, payload)
    }

    pub fn payload_as<P: for<'de> Deserialize<'de>>(&self) -> Result<P, CodecError> {
        serde_json::from_value(Value::Object(self.payload.clone())).map_err(|e| CodecError::MalformedFrame(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("unknown message type {0:?}")]
    UnknownType(String),
    #[error("malformed frame: {0}")]
    MalformedFrame(String),
}

impl CodecError {
    pub fn code(&self) -> &'static str {
        match self {
            CodecError::UnknownType(_) => "UnknownType",
            CodecError::MalformedFrame(_) => "MalformedFrame",
        }
    }
}

pub fn encode(envelope: &Envelope) -> String {
    serde_json::to_string(envelope).expect("envelope serializes")
}

pub fn decode(text: &str) -> Result<Envelope, CodecError> {
    let value: Value = serde_json::from_str(text).map_err(|e| CodecError::MalformedFrame(e.to_string()))?;
    let Value::Object(obj) = &value else {
        return Err(CodecError::MalformedFrame("frame is not a JSON object".into()));
    };
    let kind = match obj.get("type") {
        Some(Value::String(s)) => MessageType::parse(s).ok_or_else(|| CodecError::UnknownType(s.clone()))?,
        Some(_) => return Err(CodecError::MalformedFrame("type is not a string".into())),
        None => return Err(CodecError::MalformedFrame("missing type".into())),
    };
    // subscribe is the one frame that may omit the sequencing fields
    if kind != MessageType::Subscribe {
        for key in ["seq", "ts_ms", "payload"] {
            if !obj.contains_key(key) {
                return Err(CodecError::MalformedFrame(format!("{kind} frame is missing {key}")));
            }
        }
    }
    serde_json::from_value(value).map_err(|e| CodecError::MalformedFrame(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    UserModel,
    FramePipeline,
    Perception,
    ContextClassifier,
    Debouncer,
    ProactiveAgent,
}

impl Component {
    pub const ALL: [Component; 6] = [
        Component::UserModel,
        Component::FramePipeline,
        Component::Perception,
        Component::ContextClassifier,
        Component::Debouncer,
        Component::ProactiveAgent,
    ];
}

/// Whether an envelope came from a client or was emitted by a component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Inbound,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RouteError {
    #[error("{0} is not accepted from clients")]
    NotAccepted(MessageType),
    #[error("inject payload has no recognised kind")]
    BadInject,
}

/// Subscription table: which components receive an envelope.
pub fn route(direction: Direction, envelope: &Envelope) -> Result<Vec<Component>, RouteError> {
    use Component::*;
    use MessageType as T;
    let targets = match (direction, envelope.kind) {
        (Direction::Inbound, t) if !t.accepted_inbound() => return Err(RouteError::NotAccepted(t)),
        (Direction::Inbound, T::SessionStart) | (Direction::Inbound, T::SessionStop) => Component::ALL.to_vec(),
        (Direction::Inbound, T::FrameBatch) => vec![FramePipeline],
        (Direction::Inbound, T::UserUtterance) => vec![ProactiveAgent],
        (Direction::Inbound, T::Inject) => match envelope.payload.get("kind").and_then(Value::as_str) {
            Some("utterance") | Some("other_speaker_toggle") | Some("remind") => vec![ProactiveAgent],
            Some("scene") => vec![Perception],
            _ => return Err(RouteError::BadInject),
        },
        (Direction::Inbound, T::Subscribe) => vec![],
        (Direction::Internal, T::FrameBatch) => vec![Perception],
        (Direction::Internal, T::SceneObservation) => vec![ContextClassifier],
        (Direction::Internal, T::ContextVerdict) => vec![Debouncer],
        (Direction::Internal, T::DebounceDecision) => vec![ProactiveAgent],
        (Direction::Internal, _) => vec![],
        (Direction::Inbound, _) => unreachable!("filtered by accepted_inbound"),
    };
    Ok(targets)
}
