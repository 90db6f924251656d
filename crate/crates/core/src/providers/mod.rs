//! Uniform interfaces to the external model services plus latency tracing.
//!
//! The pipeline never calls a provider directly; it goes through
//! [`ProviderSuite`], which stamps every call with one [`TraceSpan`].

pub mod mock;
pub mod trace;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::Clock;
use crate::frame_pipeline::GrayImage;

pub use mock::{MockDescriber, MockLanguageModel, MockSpeechToText, MockSynthesizer, ScriptEntry, ScriptedReplies};
pub use trace::{
    end_to_end_latency, write_jsonl, LatencyReport, TraceComponent, TraceError, TraceSpan, Tracer, LATENCY_BUDGET_MS,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("{component} call exceeded its {deadline_ms} ms deadline")]
    Timeout {
        component: TraceComponent,
        deadline_ms: u64,
    },
    #[error("{component} script exhausted")]
    ScriptExhausted { component: TraceComponent },
    #[error("deadline must be positive")]
    InvalidDeadline,
    #[error("provider failure: {0}")]
    Failed(String),
}

impl ProviderError {
    pub fn code(&self) -> &'static str {
        match self {
            ProviderError::Timeout { .. } => "ProviderTimeout",
            ProviderError::ScriptExhausted { .. } => "ScriptExhausted",
            ProviderError::InvalidDeadline => "InvalidDeadline",
            ProviderError::Failed(_) => "ProviderError",
        }
    }
}

/// Average per-component latencies of the reference deployment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderLatencyProfile {
    pub stt_ms: u64,
    pub mllm_ms: u64,
    pub tts_ms: u64,
}

impl Default for ProviderLatencyProfile {
    fn default() -> Self {
        Self {
            stt_ms: 100,
            mllm_ms: 450,
            tts_ms: 370,
        }
    }
}

/// Per-call deadlines in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Deadlines {
    pub stt_ms: u64,
    pub describe_ms: u64,
    pub classify_ms: u64,
    pub complete_ms: u64,
    pub tts_ms: u64,
}

impl Default for Deadlines {
    fn default() -> Self {
        Self {
            stt_ms: 1000,
            describe_ms: 2000,
            classify_ms: 2000,
            complete_ms: 2000,
            tts_ms: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
        }
    }
}

/// A captured stretch of user speech. Scenario scripts and the console
/// supply the transcript directly, so `transcript` doubles as the STT hint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpeechInput {
    pub transcript: String,
    pub duration_ms: u64,
}

/// Opaque reference to synthesized audio.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AudioHandle {
    pub id: String,
    pub duration_ms: u64,
}

pub trait LanguageModel: Send + Sync {
    fn complete(&self, messages: &[ChatMessage], deadline_ms: u64) -> Result<String, ProviderError>;
}

pub trait VisionDescriber: Send + Sync {
    fn describe(&self, frames: &[GrayImage], prompt: &str, deadline_ms: u64) -> Result<String, ProviderError>;
}

pub trait SpeechToText: Send + Sync {
    fn transcribe(&self, input: &SpeechInput, deadline_ms: u64) -> Result<String, ProviderError>;
}

pub trait SpeechSynthesizer: Send + Sync {
    fn synthesize(&self, text: &str, voice_ref: &str, deadline_ms: u64) -> Result<AudioHandle, ProviderError>;
}

/// The full set of providers one session talks to, with shared clock and tracer.
#[derive(Clone)]
pub struct ProviderSuite {
    pub stt: Arc<dyn SpeechToText>,
    pub vision: Arc<dyn VisionDescriber>,
    pub classifier: Arc<dyn LanguageModel>,
    pub agent: Arc<dyn LanguageModel>,
    pub tts: Arc<dyn SpeechSynthesizer>,
    pub deadlines: Deadlines,
    clock: Arc<dyn Clock>,
    tracer: Tracer,
}

impl ProviderSuite {
    pub fn new(
        stt: Arc<dyn SpeechToText>,
        vision: Arc<dyn VisionDescriber>,
        classifier: Arc<dyn LanguageModel>,
        agent: Arc<dyn LanguageModel>,
        tts: Arc<dyn SpeechSynthesizer>,
        clock: Arc<dyn Clock>,
        tracer: Tracer,
    ) -> Self {
        Self {
            stt,
            vision,
            classifier,
            agent,
            tts,
            deadlines: Deadlines::default(),
            clock,
            tracer,
        }
    }

    /// Scripted mocks on a shared clock, each carrying `profile`'s latency.
    pub fn mocks(
        clock: Arc<dyn Clock>,
        tracer: Tracer,
        profile: ProviderLatencyProfile,
        describe: ScriptedReplies,
        classify: ScriptedReplies,
        agent: ScriptedReplies,
    ) -> Self {
        Self::new(
            Arc::new(MockSpeechToText::echo(clock.clone(), profile.stt_ms)),
            Arc::new(MockDescriber::new(clock.clone(), profile.mllm_ms, describe)),
            Arc::new(MockLanguageModel::new(
                TraceComponent::Classifier,
                clock.clone(),
                profile.mllm_ms,
                classify,
            )),
            Arc::new(MockLanguageModel::new(
                TraceComponent::Mllm,
                clock.clone(),
                profile.mllm_ms,
                agent,
            )),
            Arc::new(MockSynthesizer::new(clock.clone(), profile.tts_ms)),
            clock,
            tracer,
        )
    }

    pub fn with_deadlines(mut self, deadlines: Deadlines) -> Self {
        self.deadlines = deadlines;
        self
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    pub fn tracer(&self) -> &Tracer {
        &self.tracer
    }

    fn traced<T>(
        &self,
        component: TraceComponent,
        correlation_id: &str,
        call: impl FnOnce() -> Result<T, ProviderError>,
    ) -> Result<T, ProviderError> {
        let start_ms = self.clock.now_ms();
        let result = call();
        let end_ms = self.clock.now_ms();
        self.tracer.record(TraceSpan {
            component,
            start_ms,
            end_ms,
            session_id: self.tracer.session_id().to_string(),
            correlation_id: correlation_id.to_string(),
            ok: result.is_ok(),
        });
        result
    }

    pub fn transcribe(&self, input: &SpeechInput, correlation_id: &str) -> Result<String, ProviderError> {
        let deadline = self.deadlines.stt_ms;
        self.traced(TraceComponent::Stt, correlation_id, || self.stt.transcribe(input, deadline))
    }

    pub fn describe(&self, frames: &[GrayImage], prompt: &str, correlation_id: &str) -> Result<String, ProviderError> {
        let deadline = self.deadlines.describe_ms;
        self.traced(TraceComponent::Mllm, correlation_id, || {
            self.vision.describe(frames, prompt, deadline)
        })
    }

    pub fn classify(&self, prompt: &str, correlation_id: &str) -> Result<String, ProviderError> {
        let deadline = self.deadlines.classify_ms;
        let messages = [ChatMessage::new(Role::User, prompt)];
        self.traced(TraceComponent::Classifier, correlation_id, || {
            self.classifier.complete(&messages, deadline)
        })
    }

    pub fn complete(&self, messages: &[ChatMessage], correlation_id: &str) -> Result<String, ProviderError> {
        let deadline = self.deadlines.complete_ms;
        self.traced(TraceComponent::Mllm, correlation_id, || self.agent.complete(messages, deadline))
    }

    pub fn synthesize(&self, text: &str, voice_ref: &str, correlation_id: &str) -> Result<AudioHandle, ProviderError> {
        let deadline = self.deadlines.tts_ms;
        self.traced(TraceComponent::Tts, correlation_id, || {
            self.tts.synthesize(text, voice_ref, deadline)
        })
    }
}
