//! Deterministic scripted providers.
//!
//! Each mock charges its latency to the shared clock, so under a
//! [`SimClock`](crate::clock::SimClock) a call takes exactly its profile time.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{
    AudioHandle, ChatMessage, LanguageModel, ProviderError, SpeechInput, SpeechSynthesizer, SpeechToText,
    TraceComponent, VisionDescriber,
};
use crate::clock::Clock;
use crate::frame_pipeline::GrayImage;

/// One scripted reply. `match` restricts the entry to requests whose subject
/// (the last message, or the prompt for vision calls) contains the pattern.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptEntry {
    #[serde(default, rename = "match", skip_serializing_if = "Option::is_none")]
    pub pattern: Option<String>,
    pub reply: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<u64>,
}

impl ScriptEntry {
    pub fn reply(text: impl Into<String>) -> Self {
        Self {
            pattern: None,
            reply: text.into(),
            latency_ms: None,
        }
    }

    pub fn matching(pattern: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            pattern: Some(pattern.into()),
            reply: text.into(),
            latency_ms: None,
        }
    }

    pub fn with_latency(mut self, ms: u64) -> Self {
        self.latency_ms = Some(ms);
        self
    }
}

/// Reply queue consumed front to back. The first entry whose pattern matches
/// is taken; with no match, strict mode fails and lenient mode returns the fallback.
#[derive(Debug)]
pub struct ScriptedReplies {
    queue: Mutex<VecDeque<ScriptEntry>>,
    fallback: Option<String>,
}

impl ScriptedReplies {
    pub fn strict(entries: impl IntoIterator<Item = ScriptEntry>) -> Self {
        Self {
            queue: Mutex::new(entries.into_iter().collect()),
            fallback: None,
        }
    }

    pub fn lenient(entries: impl IntoIterator<Item = ScriptEntry>, fallback: impl Into<String>) -> Self {
        Self {
            queue: Mutex::new(entries.into_iter().collect()),
            fallback: Some(fallback.into()),
        }
    }

    pub fn remaining(&self) -> usize {
        self.queue.lock().expect("script lock").len()
    }

    fn take(&self, subject: &str) -> Option<ScriptEntry> {
        let mut queue = self.queue.lock().expect("script lock");
        let pos = queue.iter().position(|e| match &e.pattern {
            Some(p) => subject.contains(p.as_str()),
            None => true,
        });
        match pos {
            Some(i) => queue.remove(i),
            None => self.fallback.as_ref().map(|f| ScriptEntry::reply(f.clone())),
        }
    }
}

fn charge(clock: &dyn Clock, component: TraceComponent, latency_ms: u64, deadline_ms: u64) -> Result<(), ProviderError> {
    if deadline_ms == 0 {
        return Err(ProviderError::InvalidDeadline);
    }
    if latency_ms > deadline_ms {
        clock.sleep_ms(deadline_ms);
        return Err(ProviderError::Timeout { component, deadline_ms });
    }
    clock.sleep_ms(latency_ms);
    Ok(())
}

fn scripted(
    replies: &ScriptedReplies,
    subject: &str,
    clock: &dyn Clock,
    component: TraceComponent,
    latency_ms: u64,
    deadline_ms: u64,
) -> Result<String, ProviderError> {
    if deadline_ms == 0 {
        return Err(ProviderError::InvalidDeadline);
    }
    let entry = replies
        .take(subject)
        .ok_or(ProviderError::ScriptExhausted { component })?;
    charge(clock, component, entry.latency_ms.unwrap_or(latency_ms), deadline_ms)?;
    Ok(entry.reply)
}

pub struct MockLanguageModel {
    component: TraceComponent,
    clock: Arc<dyn Clock>,
    latency_ms: u64,
    replies: ScriptedReplies,
}

impl MockLanguageModel {
    pub fn new(component: TraceComponent, clock: Arc<dyn Clock>, latency_ms: u64, replies: ScriptedReplies) -> Self {
        Self {
            component,
            clock,
            latency_ms,
            replies,
        }
    }
}

impl LanguageModel for MockLanguageModel {
    fn complete(&self, messages: &[ChatMessage], deadline_ms: u64) -> Result<String, ProviderError> {
        let subject = messages.last().map(|m| m.content.as_str()).unwrap_or("");
        scripted(&self.replies, subject, &*self.clock, self.component, self.latency_ms, deadline_ms)
    }
}

pub struct MockDescriber {
    clock: Arc<dyn Clock>,
    latency_ms: u64,
    replies: ScriptedReplies,
}

impl MockDescriber {
    pub fn new(clock: Arc<dyn Clock>, latency_ms: u64, replies: ScriptedReplies) -> Self {
        Self {
            clock,
            latency_ms,
            replies,
        }
    }
}

impl VisionDescriber for MockDescriber {
    fn describe(&self, _frames: &[GrayImage], prompt: &str, deadline_ms: u64) -> Result<String, ProviderError> {
        scripted(
            &self.replies,
            prompt,
            &*self.clock,
            TraceComponent::Mllm,
            self.latency_ms,
            deadline_ms,
        )
    }
}

/// Returns the supplied transcript after the profile latency.
pub struct MockSpeechToText {
    clock: Arc<dyn Clock>,
    latency_ms: u64,
}

impl MockSpeechToText {
    pub fn echo(clock: Arc<dyn Clock>, latency_ms: u64) -> Self {
        Self { clock, latency_ms }
    }
}

impl SpeechToText for MockSpeechToText {
    fn transcribe(&self, input: &SpeechInput, deadline_ms: u64) -> Result<String, ProviderError> {
        charge(&*self.clock, TraceComponent::Stt, self.latency_ms, deadline_ms)?;
        Ok(input.transcript.clone())
    }
}

/// Mock speaking rate used for synthesized audio durations.
const MOCK_MS_PER_WORD: u64 = 300;

pub struct MockSynthesizer {
    clock: Arc<dyn Clock>,
    latency_ms: u64,
    issued: AtomicU64,
}

impl MockSynthesizer {
    pub fn new(clock: Arc<dyn Clock>, latency_ms: u64) -> Self {
        Self {
            clock,
            latency_ms,
            issued: AtomicU64::new(0),
        }
    }
}

impl SpeechSynthesizer for MockSynthesizer {
    fn synthesize(&self, text: &str, voice_ref: &str, deadline_ms: u64) -> Result<AudioHandle, ProviderError> {
        charge(&*self.clock, TraceComponent::Tts, self.latency_ms, deadline_ms)?;
        let n = self.issued.fetch_add(1, Ordering::SeqCst);
        Ok(AudioHandle {
            id: format!("{voice_ref}/tts-{n}"),
            duration_ms: text.split_whitespace().count() as u64 * MOCK_MS_PER_WORD,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::SimClock;
    use crate::providers::Role;

    fn sim() -> (SimClock, Arc<dyn Clock>) {
        let clock = SimClock::new();
        let shared: Arc<dyn Clock> = Arc::new(clock.clone());
        (clock, shared)
    }

    #[test]
    fn strict_empty_script_is_exhausted() {
        let (_, clock) = sim();
        let lm = MockLanguageModel::new(TraceComponent::Mllm, clock, 450, ScriptedReplies::strict([]));
        let err = lm.complete(&[ChatMessage::new(Role::User, "hi")], 2000).unwrap_err();
        assert_eq!(
            err,
            ProviderError::ScriptExhausted {
                component: TraceComponent::Mllm
            }
        );
    }

    #[test]
    fn lenient_script_falls_back() {
        let (_, clock) = sim();
        let lm = MockLanguageModel::new(
            TraceComponent::Classifier,
            clock,
            10,
            ScriptedReplies::lenient([], "Output: unsure"),
        );
        assert_eq!(lm.complete(&[], 100).unwrap(), "Output: unsure");
    }

    #[test]
    fn stt_deadline_shorter_than_latency_times_out() {
        let (sim, clock) = sim();
        let stt = MockSpeechToText::echo(clock, 100);
        let input = SpeechInput {
            transcript: "hello".into(),
            duration_ms: 500,
        };
        let err = stt.transcribe(&input, 50).unwrap_err();
        assert_eq!(
            err,
            ProviderError::Timeout {
                component: TraceComponent::Stt,
                deadline_ms: 50
            }
        );
        assert_eq!(sim.now_ms(), 50);
    }

    #[test]
    fn pattern_entries_are_selected_by_subject() {
        let (_, clock) = sim();
        let replies = ScriptedReplies::strict([
            ScriptEntry::matching("soda", "Output: yes"),
            ScriptEntry::matching("hallway", "Output: no"),
        ]);
        let lm = MockLanguageModel::new(TraceComponent::Classifier, clock, 1, replies);
        let ask = |s: &str| lm.complete(&[ChatMessage::new(Role::User, s)], 10);
        assert_eq!(ask("a long hallway").unwrap(), "Output: no");
        assert_eq!(ask("a shiny soda").unwrap(), "Output: yes");
        assert!(ask("a shiny soda").is_err());
    }

    #[test]
    fn zero_deadline_rejected() {
        let (_, clock) = sim();
        let tts = MockSynthesizer::new(clock, 370);
        assert_eq!(tts.synthesize("x", "v", 0).unwrap_err(), ProviderError::InvalidDeadline);
    }

    #[test]
    fn entry_latency_override_applies() {
        let (sim, clock) = sim();
        let d = MockDescriber::new(
            clock,
            450,
            ScriptedReplies::strict([ScriptEntry::reply("slow").with_latency(5000)]),
        );
        assert!(matches!(d.describe(&[], "p", 2000), Err(ProviderError::Timeout { .. })));
        assert_eq!(sim.now_ms(), 2000);
    }
}
