//! Typed payloads carried inside [`Envelope`](super::Envelope)s.

use serde::{Deserialize, Serialize};

use crate::context_classifier::Verdict;
use crate::debouncer::DebounceReason;
use crate::frame_source::FrameSource;
use crate::proactive_agent::TriggerReason;
use crate::providers::AudioHandle;
use crate::user_model::UserProfile;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionStart {
    pub profile: UserProfile,
}

/// Outbound acknowledgement of a started session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionStarted {
    pub user_id: String,
    pub profile_hash: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub frames_received: u64,
    pub frames_kept: u64,
    pub frames_dropped: u64,
    pub frames_unbatched: u64,
    pub batches: u64,
    pub observations: u64,
    pub nudges: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameRef {
    pub frame_id: u64,
    pub ts_ms: u64,
    pub source: FrameSource,
}

/// Inbound raw frames; outbound uses [`BatchSummary`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Frames {
    pub frames: Vec<FrameRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub batch_id: u64,
    pub source_frame_ids: Vec<u64>,
    pub kept_frame_ids: Vec<u64>,
    pub dropped: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictEvent {
    pub batch_id: u64,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw_output: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degraded: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DebounceEvent {
    pub batch_id: u64,
    #[serde(rename = "R_t")]
    pub step: u64,
    pub verdict: Verdict,
    pub trigger: bool,
    pub reason: DebounceReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Delivery {
    Immediate,
    Deferred,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewInfoEvent {
    pub text: String,
    pub trigger_reason: TriggerReason,
    pub correlation_id: String,
    pub delivery: Delivery,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Utterance {
    pub text: String,
    #[serde(default)]
    pub duration_ms: u64,
}

/// Transcribed user turn, echoed to observers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserTurn {
    pub text: String,
    pub correlation_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentResponse {
    pub text: String,
    pub trigger_reason: TriggerReason,
    pub ts_ms: u64,
    pub decided_at_ms: u64,
    pub correlation_id: String,
    pub audio_ref: Option<AudioHandle>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SilentReason {
    /// The model answered with the silence sentinel.
    Sentinel,
    /// A deferred trigger waited past the cap.
    Abandoned,
    /// The session ended with a trigger still deferred.
    SessionStop,
    /// A newer trigger replaced a deferred one.
    Superseded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SilentEvent {
    pub ts_ms: u64,
    pub reason: SilentReason,
    pub correlation_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub waited_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum Inject {
    Utterance {
        text: String,
        #[serde(default)]
        duration_ms: u64,
    },
    /// Pre-written scene description standing in for a described frame batch.
    Scene { description: String },
    /// Sets (or, without `active`, flips) the other-speaker flag.
    OtherSpeakerToggle {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        active: Option<bool>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        text: Option<String>,
    },
    /// Asks the agent to remind the user of something at the next quiet moment.
    Remind { text: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorEvent {
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ref_seq: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ref_type: Option<String>,
}
