//! The first-person dialogue agent: conversation history, `[NEW INFO]`
//! injection, and the speak-now / defer / stay-silent decision.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::debouncer::{DebounceDecision, DebounceReason};
use crate::perception::SceneObservation;
use crate::providers::{AudioHandle, ChatMessage, ProviderError, ProviderSuite, Role};
use crate::user_model::{render_persona_prompt, PersonaPrompt, ProfileError, UserProfile};

pub const NEW_INFO_TAG: &str = "[NEW INFO]";
pub const REMINDER_TAG: &str = "[REMINDER]";
pub const SILENT_SENTINEL: &str = "[SILENT]";
/// Sent as a second system message after the persona prompt.
pub const SENTINEL_INSTRUCTION: &str =
    "If no response is warranted right now, reply with exactly [SILENT] and nothing else.";
pub const DEFAULT_DEFERRAL_CAP_MS: u64 = 30_000;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("utterance is empty")]
    EmptyUtterance,
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TurnRole {
    User,
    Assistant,
    System,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversationTurn {
    pub role: TurnRole,
    pub text: String,
    pub ts_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerReason {
    ContextChange,
    Interval,
    UserSpeech,
    Scripted,
}

impl TriggerReason {
    pub fn from_debounce(reason: DebounceReason) -> Option<Self> {
        match reason {
            DebounceReason::StateChange => Some(TriggerReason::ContextChange),
            DebounceReason::Interval => Some(TriggerReason::Interval),
            DebounceReason::Suppressed | DebounceReason::NotRelevant => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            TriggerReason::ContextChange => "context_change",
            TriggerReason::Interval => "interval",
            TriggerReason::UserSpeech => "user_speech",
            TriggerReason::Scripted => "scripted",
        }
    }
}

impl std::fmt::Display for TriggerReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NudgeResponse {
    pub text: String,
    pub ts_ms: u64,
    pub trigger_reason: TriggerReason,
    pub audio_ref: Option<AudioHandle>,
    pub correlation_id: String,
    /// When the completion was requested, i.e. when the quiet check passed.
    pub decided_at_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SpeechActivity {
    /// `None` until the user first speaks.
    pub last_user_speech_ms: Option<u64>,
    pub other_speaker_active: bool,
}

impl SpeechActivity {
    pub fn user_spoke(&mut self, ts_ms: u64) {
        self.last_user_speech_ms = Some(self.last_user_speech_ms.map_or(ts_ms, |t| t.max(ts_ms)));
    }
}

/// True when the user has been quiet for the profile threshold and nobody else is talking.
pub fn quiet_check(activity: &SpeechActivity, now_ms: u64, profile: &UserProfile) -> bool {
    if activity.other_speaker_active {
        return false;
    }
    match activity.last_user_speech_ms {
        None => true,
        Some(last) => now_ms.saturating_sub(last) >= profile.quiet_threshold_ms && now_ms >= last,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PendingTrigger {
    pub since_ms: u64,
    pub reason: TriggerReason,
    pub correlation_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AgentOutcome {
    Spoke(NudgeResponse),
    Silent { ts_ms: u64, correlation_id: String },
    Deferred { since_ms: u64 },
    Abandoned { ts_ms: u64, waited_ms: u64, correlation_id: String },
    Failed { error: ProviderError, correlation_id: String },
    Idle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub deferral_cap_ms: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            deferral_cap_ms: DEFAULT_DEFERRAL_CAP_MS,
        }
    }
}

pub struct ProactiveAgent {
    profile: UserProfile,
    persona: PersonaPrompt,
    config: AgentConfig,
    history: Vec<ConversationTurn>,
    activity: SpeechActivity,
    pending: Option<PendingTrigger>,
}

impl ProactiveAgent {
    pub fn new(profile: UserProfile, config: AgentConfig) -> Result<Self, AgentError> {
        let persona = render_persona_prompt(&profile)?;
        Ok(Self {
            profile,
            persona,
            config,
            history: Vec::new(),
            activity: SpeechActivity::default(),
            pending: None,
        })
    }

    pub fn profile(&self) -> &UserProfile {
        &self.profile
    }

    pub fn persona(&self) -> &PersonaPrompt {
        &self.persona
    }

    pub fn history(&self) -> &[ConversationTurn] {
        &self.history
    }

    pub fn activity(&self) -> &SpeechActivity {
        &self.activity
    }

    pub fn pending(&self) -> Option<&PendingTrigger> {
        self.pending.as_ref()
    }

    fn push_turn(&mut self, role: TurnRole, text: String, ts_ms: u64) {
        let ts_ms = self.history.last().map_or(ts_ms, |t| t.ts_ms.max(ts_ms));
        self.history.push(ConversationTurn { role, text, ts_ms });
    }

    /// Appends the observation as a `[NEW INFO]` system turn when the debouncer fired.
    pub fn inject_context(
        &mut self,
        observation: &SceneObservation,
        decision: &DebounceDecision,
        ts_ms: u64,
    ) -> Option<&ConversationTurn> {
        if !decision.trigger {
            return None;
        }
        self.push_turn(
            TurnRole::System,
            format!("{NEW_INFO_TAG} {}", observation.description),
            ts_ms,
        );
        self.history.last()
    }

    pub fn inject_reminder(&mut self, request: &str, ts_ms: u64) -> &ConversationTurn {
        self.push_turn(TurnRole::System, format!("{REMINDER_TAG} {}", request.trim()), ts_ms);
        self.history.last().expect("turn just pushed")
    }

    pub fn set_other_speaker(&mut self, active: bool) {
        self.activity.other_speaker_active = active;
    }

    fn messages(&self) -> Vec<ChatMessage> {
        let mut messages = Vec::with_capacity(self.history.len() + 2);
        messages.push(ChatMessage::new(Role::System, self.persona.text.clone()));
        messages.push(ChatMessage::new(Role::System, SENTINEL_INSTRUCTION));
        messages.extend(self.history.iter().map(|t| {
            let role = match t.role {
                TurnRole::User => Role::User,
                TurnRole::Assistant => Role::Assistant,
                TurnRole::System => Role::System,
            };
            ChatMessage::new(role, t.text.clone())
        }));
        messages
    }

    fn respond(&mut self, reason: TriggerReason, correlation_id: &str, providers: &ProviderSuite) -> AgentOutcome {
        let decided_at_ms = providers.clock().now_ms();
        let reply = match providers.complete(&self.messages(), correlation_id) {
            Ok(r) => r,
            Err(error) => {
                tracing::warn!(%error, correlation_id, "agent completion failed");
                return AgentOutcome::Failed {
                    error,
                    correlation_id: correlation_id.to_string(),
                };
            }
        };
        let text = reply.trim();
        if text.is_empty() || text == SILENT_SENTINEL {
            return AgentOutcome::Silent {
                ts_ms: providers.clock().now_ms(),
                correlation_id: correlation_id.to_string(),
            };
        }
        let text = text.to_string();
        self.push_turn(TurnRole::Assistant, text.clone(), providers.clock().now_ms());
        let audio_ref = match providers.synthesize(&text, &self.profile.voice_ref, correlation_id) {
            Ok(handle) => Some(handle),
            Err(error) => {
                tracing::warn!(%error, correlation_id, "speech synthesis failed; delivering text only");
                None
            }
        };
        AgentOutcome::Spoke(NudgeResponse {
            text,
            ts_ms: providers.clock().now_ms(),
            trigger_reason: reason,
            audio_ref,
            correlation_id: correlation_id.to_string(),
            decided_at_ms,
        })
    }

    /// Records the user's (already transcribed) utterance and asks for a reply.
    pub fn on_user_utterance(
        &mut self,
        utterance: &str,
        correlation_id: &str,
        providers: &ProviderSuite,
    ) -> Result<AgentOutcome, AgentError> {
        let utterance = utterance.trim();
        if utterance.is_empty() {
            return Err(AgentError::EmptyUtterance);
        }
        let now = providers.clock().now_ms();
        self.push_turn(TurnRole::User, utterance.to_string(), now);
        self.activity.user_spoke(now);
        Ok(self.respond(TriggerReason::UserSpeech, correlation_id, providers))
    }

    /// Marks the user as speaking without adding a turn (e.g. speech still in progress).
    pub fn note_user_speech(&mut self, ts_ms: u64) {
        self.activity.user_spoke(ts_ms);
    }

    /// Responds to a fresh injection now if the user is quiet, otherwise parks it.
    /// A newer trigger replaces an older parked one.
    pub fn on_context_trigger(
        &mut self,
        reason: TriggerReason,
        correlation_id: &str,
        providers: &ProviderSuite,
    ) -> AgentOutcome {
        let now = providers.clock().now_ms();
        if quiet_check(&self.activity, now, &self.profile) {
            self.pending = None;
            return self.respond(reason, correlation_id, providers);
        }
        self.pending = Some(PendingTrigger {
            since_ms: now,
            reason,
            correlation_id: correlation_id.to_string(),
        });
        AgentOutcome::Deferred { since_ms: now }
    }

    /// Periodic re-check of a parked trigger.
    pub fn on_tick(&mut self, providers: &ProviderSuite) -> AgentOutcome {
        let Some(pending) = self.pending.clone() else {
            return AgentOutcome::Idle;
        };
        let now = providers.clock().now_ms();
        let waited_ms = now.saturating_sub(pending.since_ms);
        if waited_ms <= self.config.deferral_cap_ms && quiet_check(&self.activity, now, &self.profile) {
            self.pending = None;
            return self.respond(pending.reason, &pending.correlation_id, providers);
        }
        self.expire(now).unwrap_or(AgentOutcome::Idle)
    }

    /// Drops a parked trigger whose wait has reached the cap. The abandonment
    /// is stamped at the instant the cap ran out, even if the check comes later.
    pub fn expire(&mut self, now_ms: u64) -> Option<AgentOutcome> {
        let pending = self.pending.as_ref()?;
        let cap = self.config.deferral_cap_ms;
        if now_ms.saturating_sub(pending.since_ms) < cap {
            return None;
        }
        let pending = self.pending.take()?;
        Some(AgentOutcome::Abandoned {
            ts_ms: pending.since_ms + cap,
            waited_ms: cap,
            correlation_id: pending.correlation_id,
        })
    }

    /// Drops any parked trigger; history is kept.
    pub fn cancel_pending(&mut self) -> Option<PendingTrigger> {
        self.pending.take()
    }
}
