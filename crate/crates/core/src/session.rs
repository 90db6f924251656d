//! One user's running pipeline.
//!
//! A [`Session`] owns every per-session component and moves data between
//! them as envelopes: an inbound envelope is routed to its components, each
//! component may emit outbound envelopes, and those the routing table sends
//! onward are delivered in emission order until the queue is empty. Every
//! outbound envelope is appended to the session log.

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context_classifier::{classify, ClassifierFailure, DEFAULT_HISTORY_TURNS};
use crate::debouncer::{DebounceConfig, DebounceDecision, DebounceState};
use crate::frame_pipeline::{Batcher, CameraConfig, FilterConfig, FrameBatch, FrameError, FrameSample, GrayImage};
use crate::gateway::payload::{
    BatchSummary, DebounceEvent, Delivery, ErrorEvent, Frames, Inject, NewInfoEvent, SessionStarted, SessionSummary,
    SilentEvent, SilentReason, UserTurn, Utterance, VerdictEvent,
};
use crate::gateway::{route, Component, Direction, Envelope, MessageType};
use crate::perception::{batch_correlation_id, describe_batch, SceneObservation, Sequencer};
use crate::proactive_agent::{
    quiet_check, AgentConfig, AgentError, AgentOutcome, ProactiveAgent, TriggerReason,
};
use crate::providers::{ProviderSuite, SpeechInput, TraceComponent, TraceSpan};
use crate::user_model::UserProfile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub camera: CameraConfig,
    pub filter: FilterConfig,
    pub debounce: DebounceConfig,
    pub agent: AgentConfig,
    pub history_turns: usize,
    /// Period of the deferred-response re-check.
    pub tick_ms: u64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            camera: CameraConfig::default(),
            filter: FilterConfig::default(),
            debounce: DebounceConfig::default(),
            agent: AgentConfig::default(),
            history_turns: DEFAULT_HISTORY_TURNS,
            tick_ms: 250,
        }
    }
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("invalid session config: {0}")]
    Config(&'static str),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionCounters {
    pub frames_received: u64,
    pub frames_rejected: u64,
    pub frames_kept: u64,
    pub frames_dropped: u64,
    pub frames_unbatched: u64,
    pub batches: u64,
    pub empty_batches: u64,
    pub observations: u64,
    pub describe_failures: u64,
    pub verdicts: BTreeMap<String, u64>,
    pub triggers: u64,
    pub deferred: u64,
    pub nudges: BTreeMap<TriggerReason, u64>,
    pub silent: u64,
    pub abandoned: u64,
    pub superseded: u64,
    pub errors: u64,
}

impl SessionCounters {
    pub fn nudge_count(&self) -> u64 {
        self.nudges.values().sum()
    }
}

pub struct Session {
    id: String,
    config: SessionConfig,
    providers: ProviderSuite,
    batcher: Batcher,
    debouncer: DebounceState,
    agent: ProactiveAgent,
    sequencer: Sequencer<SceneObservation>,
    batch_frames: HashMap<u64, Vec<GrayImage>>,
    observations: HashMap<u64, SceneObservation>,
    queue: VecDeque<Envelope>,
    fresh: Vec<Envelope>,
    log: Vec<Envelope>,
    spans: Vec<TraceSpan>,
    next_seq: u64,
    counters: SessionCounters,
    utterances: u64,
    reminders: u64,
    stopped: bool,
}

impl Session {
    pub fn new(
        id: impl Into<String>,
        profile: UserProfile,
        config: SessionConfig,
        providers: ProviderSuite,
    ) -> Result<Self, SessionError> {
        if config.tick_ms == 0 {
            return Err(SessionError::Config("tick_ms must be positive"));
        }
        if config.debounce.interval_modulus == 0 {
            return Err(SessionError::Config("interval_modulus must be positive"));
        }
        Ok(Self {
            id: id.into(),
            batcher: Batcher::new(config.camera, config.filter)?,
            debouncer: DebounceState::new(config.debounce),
            agent: ProactiveAgent::new(profile, config.agent)?,
            config,
            providers,
            sequencer: Sequencer::new(),
            batch_frames: HashMap::new(),
            observations: HashMap::new(),
            queue: VecDeque::new(),
            fresh: Vec::new(),
            log: Vec::new(),
            spans: Vec::new(),
            next_seq: 0,
            counters: SessionCounters::default(),
            utterances: 0,
            reminders: 0,
            stopped: false,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn log(&self) -> &[Envelope] {
        &self.log
    }

    pub fn spans(&self) -> &[TraceSpan] {
        &self.spans
    }

    pub fn counters(&self) -> &SessionCounters {
        &self.counters
    }

    pub fn agent(&self) -> &ProactiveAgent {
        &self.agent
    }

    pub fn debouncer(&self) -> &DebounceState {
        &self.debouncer
    }

    pub fn is_stopped(&self) -> bool {
        self.stopped
    }

    pub fn has_pending_response(&self) -> bool {
        self.agent.pending().is_some()
    }

    fn now(&self) -> u64 {
        self.providers.clock().now_ms()
    }

    fn flush_traces(&mut self) {
        for span in self.providers.tracer().drain() {
            let env = Envelope::with_payload(MessageType::Trace, &self.id, self.next_seq, self.now(), &span);
            self.next_seq += 1;
            self.spans.push(span);
            self.log.push(env.clone());
            self.fresh.push(env);
        }
    }

    fn emit<P: Serialize>(&mut self, kind: MessageType, payload: &P) {
        self.flush_traces();
        let env = Envelope::with_payload(kind, &self.id, self.next_seq, self.now(), payload);
        self.next_seq += 1;
        if kind == MessageType::Error {
            self.counters.errors += 1;
        }
        if route(Direction::Internal, &env).is_ok_and(|t| !t.is_empty()) {
            self.queue.push_back(env.clone());
        }
        self.log.push(env.clone());
        self.fresh.push(env);
    }

    pub(crate) fn emit_error(&mut self, code: &str, message: impl Into<String>, cause: Option<&Envelope>) {
        self.emit(
            MessageType::Error,
            &ErrorEvent {
                code: code.to_string(),
                message: message.into(),
                ref_seq: cause.map(|e| e.seq),
                ref_type: cause.map(|e| e.kind.as_str().to_string()),
            },
        );
    }

    /// Envelopes emitted since the last call.
    pub(crate) fn tick_output(&mut self) -> Vec<Envelope> {
        self.take_fresh()
    }

    fn take_fresh(&mut self) -> Vec<Envelope> {
        self.flush_traces();
        std::mem::take(&mut self.fresh)
    }

    /// Emits the session-start acknowledgement.
    pub fn start(&mut self) -> Vec<Envelope> {
        let profile = self.agent.profile();
        let ack = SessionStarted {
            user_id: profile.user_id.clone(),
            profile_hash: self.agent.persona().profile_hash.clone(),
        };
        self.emit(MessageType::SessionStart, &ack);
        self.take_fresh()
    }

    /// Delivers an inbound envelope that has already passed sequencing checks.
    pub fn handle_inbound(&mut self, envelope: &Envelope) -> Vec<Envelope> {
        self.expire_pending();
        match route(Direction::Inbound, envelope) {
            Ok(targets) => {
                for component in targets {
                    self.deliver(component, envelope);
                }
                if envelope.kind == MessageType::SessionStop {
                    self.finish();
                }
            }
            Err(e) => self.emit_error("ProtocolViolation", e.to_string(), Some(envelope)),
        }
        self.drain_internal();
        self.take_fresh()
    }

    /// Re-checks a deferred response.
    pub fn tick(&mut self) -> Vec<Envelope> {
        if !self.stopped {
            let start = self.now();
            let outcome = self.agent.on_tick(&self.providers);
            self.record_agent_span(&outcome, start);
            self.emit_outcome(outcome);
        }
        self.take_fresh()
    }

    fn drain_internal(&mut self) {
        while let Some(env) = self.queue.pop_front() {
            let targets = route(Direction::Internal, &env).unwrap_or_default();
            for component in targets {
                self.deliver(component, &env);
            }
        }
    }

    fn deliver(&mut self, component: Component, env: &Envelope) {
        use Component as C;
        use MessageType as T;
        match (component, env.kind) {
            (C::FramePipeline, T::FrameBatch) => self.on_frames(env),
            (C::Perception, T::FrameBatch) => self.on_batch(env),
            (C::Perception, T::Inject) => self.on_scene_inject(env),
            (C::ContextClassifier, T::SceneObservation) => self.on_observation(env),
            (C::Debouncer, T::ContextVerdict) => self.on_verdict(env),
            (C::ProactiveAgent, T::DebounceDecision) => self.on_decision(env),
            (C::ProactiveAgent, T::UserUtterance) => match env.payload_as::<Utterance>() {
                Ok(u) => self.on_utterance(&u.text, u.duration_ms, env),
                Err(e) => self.emit_error(e.code(), e.to_string(), Some(env)),
            },
            (C::ProactiveAgent, T::Inject) => self.on_agent_inject(env),
            (c, T::SessionStop) => self.stop_component(c),
            _ => {}
        }
    }

    fn on_frames(&mut self, env: &Envelope) {
        let frames = match env.payload_as::<Frames>() {
            Ok(f) => f,
            Err(e) => return self.emit_error(e.code(), e.to_string(), Some(env)),
        };
        for frame in frames.frames {
            self.counters.frames_received += 1;
            let sample = frame
                .source
                .load()
                .map_err(|e| e.to_string())
                .and_then(|px| FrameSample::new(frame.frame_id, frame.ts_ms, &px).map_err(|e| e.to_string()));
            let pushed = sample.and_then(|s| self.batcher.push_frame(s).map_err(|e| e.to_string()));
            match pushed {
                Ok(Some(batch)) => self.on_filtered(batch),
                Ok(None) => {}
                Err(message) => {
                    self.counters.frames_rejected += 1;
                    self.emit_error("FrameRejected", message, Some(env));
                }
            }
        }
    }

    fn on_filtered(&mut self, batch: FrameBatch) {
        self.counters.batches += 1;
        self.counters.frames_kept += batch.kept_frame_ids.len() as u64;
        self.counters.frames_dropped += batch.dropped() as u64;
        if batch.kept_frame_ids.is_empty() {
            self.counters.empty_batches += 1;
        }
        let summary = BatchSummary {
            batch_id: batch.batch_id,
            source_frame_ids: batch.source_frame_ids.clone(),
            kept_frame_ids: batch.kept_frame_ids.clone(),
            dropped: batch.dropped() as u64,
        };
        self.batch_frames.insert(batch.batch_id, batch.kept_frames);
        self.emit(MessageType::FrameBatch, &summary);
    }

    fn on_batch(&mut self, env: &Envelope) {
        let Ok(summary) = env.payload_as::<BatchSummary>() else {
            return;
        };
        let batch = FrameBatch {
            batch_id: summary.batch_id,
            kept_frames: self.batch_frames.remove(&summary.batch_id).unwrap_or_default(),
            source_frame_ids: summary.source_frame_ids,
            kept_frame_ids: summary.kept_frame_ids,
            first_ts_ms: 0,
            last_ts_ms: 0,
        };
        let released = match describe_batch(&batch, &self.providers) {
            Ok(Some(obs)) => self.sequencer.offer(batch.batch_id, obs),
            Ok(None) => self.sequencer.skip(batch.batch_id),
            Err(e) => {
                self.counters.describe_failures += 1;
                self.emit_error(e.code(), format!("batch {} skipped: {e}", batch.batch_id), Some(env));
                self.sequencer.skip(batch.batch_id)
            }
        };
        for obs in released {
            self.publish_observation(obs);
        }
    }

    fn on_scene_inject(&mut self, env: &Envelope) {
        let description = match env.payload_as::<Inject>() {
            Ok(Inject::Scene { description }) if !description.trim().is_empty() => description.trim().to_string(),
            Ok(_) => return self.emit_error("EmptyObservation", "scene description is empty", Some(env)),
            Err(e) => return self.emit_error(e.code(), e.to_string(), Some(env)),
        };
        let batch_id = self.batcher.reserve_batch_id();
        let obs = SceneObservation {
            batch_id,
            ts_ms: self.now(),
            description,
            kept_frame_ids: Vec::new(),
        };
        for obs in self.sequencer.offer(batch_id, obs) {
            self.publish_observation(obs);
        }
    }

    fn publish_observation(&mut self, obs: SceneObservation) {
        self.counters.observations += 1;
        self.observations.insert(obs.batch_id, obs.clone());
        self.emit(MessageType::SceneObservation, &obs);
    }

    fn on_observation(&mut self, env: &Envelope) {
        let Ok(obs) = env.payload_as::<SceneObservation>() else {
            return;
        };
        let profile_goal = self.agent.profile().goal.clone();
        let result = classify(
            &obs,
            &profile_goal,
            self.agent.history(),
            self.config.history_turns,
            &self.providers,
        );
        if let Some(ClassifierFailure::Provider(e)) = &result.failure {
            self.emit_error(e.code(), format!("classifier degraded to UNSURE: {e}"), Some(env));
        }
        *self
            .counters
            .verdicts
            .entry(result.state.verdict.to_string())
            .or_default() += 1;
        self.emit(
            MessageType::ContextVerdict,
            &VerdictEvent {
                batch_id: result.state.batch_id,
                verdict: result.state.verdict,
                raw_output: result.raw_output,
                degraded: result.failure.map(|f| f.code().to_string()),
            },
        );
    }

    fn on_verdict(&mut self, env: &Envelope) {
        let Ok(v) = env.payload_as::<VerdictEvent>() else {
            return;
        };
        let d = self.debouncer.step(v.verdict);
        if d.trigger {
            self.counters.triggers += 1;
        }
        self.emit(
            MessageType::DebounceDecision,
            &DebounceEvent {
                batch_id: v.batch_id,
                step: d.step,
                verdict: d.verdict,
                trigger: d.trigger,
                reason: d.reason,
            },
        );
    }

    fn on_decision(&mut self, env: &Envelope) {
        let Ok(ev) = env.payload_as::<DebounceEvent>() else {
            return;
        };
        let Some(obs) = self.observations.remove(&ev.batch_id) else {
            return;
        };
        let Some(reason) = TriggerReason::from_debounce(ev.reason).filter(|_| ev.trigger) else {
            return;
        };
        let decision = DebounceDecision {
            trigger: ev.trigger,
            reason: ev.reason,
            step: ev.step,
            verdict: ev.verdict,
        };
        let now = self.now();
        let text = match self.agent.inject_context(&obs, &decision, now) {
            Some(turn) => turn.text.clone(),
            None => return,
        };
        self.trigger_agent(text, reason, batch_correlation_id(obs.batch_id));
    }

    fn expire_pending(&mut self) {
        if let Some(outcome) = self.agent.expire(self.now()) {
            self.emit_outcome(outcome);
        }
    }

    fn trigger_agent(&mut self, text: String, reason: TriggerReason, correlation_id: String) {
        self.expire_pending();
        let start = self.now();
        if let Some(old) = self.agent.cancel_pending() {
            self.counters.superseded += 1;
            self.emit(
                MessageType::Silent,
                &SilentEvent {
                    ts_ms: start,
                    reason: SilentReason::Superseded,
                    correlation_id: old.correlation_id,
                    waited_ms: Some(start.saturating_sub(old.since_ms)),
                },
            );
        }
        let quiet = quiet_check(self.agent.activity(), start, self.agent.profile());
        if !quiet {
            self.counters.deferred += 1;
        }
        self.emit(
            MessageType::NewInfoInjected,
            &NewInfoEvent {
                text,
                trigger_reason: reason,
                correlation_id: correlation_id.clone(),
                delivery: if quiet { Delivery::Immediate } else { Delivery::Deferred },
            },
        );
        let outcome = self.agent.on_context_trigger(reason, &correlation_id, &self.providers);
        self.record_agent_span(&outcome, start);
        self.emit_outcome(outcome);
    }

    fn on_utterance(&mut self, text: &str, duration_ms: u64, env: &Envelope) {
        if text.trim().is_empty() {
            return self.emit_error("EmptyUtterance", "utterance is empty", Some(env));
        }
        let correlation_id = format!("utt-{}", self.utterances);
        self.utterances += 1;
        let start = self.now();
        let input = SpeechInput {
            transcript: text.to_string(),
            duration_ms,
        };
        let transcript = match self.providers.transcribe(&input, &correlation_id) {
            Ok(t) => t,
            Err(e) => return self.emit_error(e.code(), format!("transcription failed: {e}"), Some(env)),
        };
        if transcript.trim().is_empty() {
            return self.emit_error("EmptyUtterance", "transcript is empty", Some(env));
        }
        self.emit(
            MessageType::UserUtterance,
            &UserTurn {
                text: transcript.trim().to_string(),
                correlation_id: correlation_id.clone(),
            },
        );
        match self.agent.on_user_utterance(&transcript, &correlation_id, &self.providers) {
            Ok(outcome) => {
                self.record_agent_span(&outcome, start);
                self.emit_outcome(outcome);
            }
            Err(e) => self.emit_error("EmptyUtterance", e.to_string(), Some(env)),
        }
    }

    fn on_agent_inject(&mut self, env: &Envelope) {
        let inject = match env.payload_as::<Inject>() {
            Ok(i) => i,
            Err(e) => return self.emit_error(e.code(), e.to_string(), Some(env)),
        };
        match inject {
            Inject::Utterance { text, duration_ms } => self.on_utterance(&text, duration_ms, env),
            Inject::OtherSpeakerToggle { active, text } => {
                let active = active.unwrap_or(!self.agent.activity().other_speaker_active);
                self.agent.set_other_speaker(active);
                self.emit(
                    MessageType::Inject,
                    &Inject::OtherSpeakerToggle {
                        active: Some(active),
                        text,
                    },
                );
            }
            Inject::Remind { text } => {
                if text.trim().is_empty() {
                    return self.emit_error("EmptyReminder", "reminder text is empty", Some(env));
                }
                let now = self.now();
                let turn_text = self.agent.inject_reminder(&text, now).text.clone();
                let correlation_id = format!("remind-{}", self.reminders);
                self.reminders += 1;
                self.trigger_agent(turn_text, TriggerReason::Scripted, correlation_id);
            }
            Inject::Scene { .. } => {}
        }
    }

    fn record_agent_span(&mut self, outcome: &AgentOutcome, start_ms: u64) {
        let correlation_id = match outcome {
            AgentOutcome::Spoke(n) => &n.correlation_id,
            AgentOutcome::Silent { correlation_id, .. } => correlation_id,
            AgentOutcome::Failed { correlation_id, .. } => correlation_id,
            _ => return,
        };
        self.providers.tracer().record(TraceSpan {
            component: TraceComponent::Agent,
            start_ms,
            end_ms: self.now().max(start_ms),
            session_id: self.id.clone(),
            correlation_id: correlation_id.clone(),
            ok: !matches!(outcome, AgentOutcome::Failed { .. }),
        });
    }

    fn emit_outcome(&mut self, outcome: AgentOutcome) {
        match outcome {
            AgentOutcome::Spoke(n) => {
                *self.counters.nudges.entry(n.trigger_reason).or_default() += 1;
                self.emit(
                    MessageType::AgentResponse,
                    &crate::gateway::payload::AgentResponse {
                        text: n.text,
                        trigger_reason: n.trigger_reason,
                        ts_ms: n.ts_ms,
                        decided_at_ms: n.decided_at_ms,
                        correlation_id: n.correlation_id,
                        audio_ref: n.audio_ref,
                    },
                );
            }
            AgentOutcome::Silent { ts_ms, correlation_id } => {
                self.counters.silent += 1;
                self.emit(
                    MessageType::Silent,
                    &SilentEvent {
                        ts_ms,
                        reason: SilentReason::Sentinel,
                        correlation_id,
                        waited_ms: None,
                    },
                );
            }
            AgentOutcome::Abandoned {
                ts_ms,
                waited_ms,
                correlation_id,
            } => {
                self.counters.abandoned += 1;
                self.emit(
                    MessageType::Silent,
                    &SilentEvent {
                        ts_ms,
                        reason: SilentReason::Abandoned,
                        correlation_id,
                        waited_ms: Some(waited_ms),
                    },
                );
            }
            AgentOutcome::Failed { error, correlation_id } => {
                self.emit_error(error.code(), format!("{correlation_id}: {error}"), None);
            }
            AgentOutcome::Deferred { .. } | AgentOutcome::Idle => {}
        }
    }

    fn stop_component(&mut self, component: Component) {
        match component {
            Component::FramePipeline => {
                self.counters.frames_unbatched += self.batcher.pending_len() as u64;
                self.batcher.reset();
            }
            Component::Perception => {
                self.sequencer.reset();
                self.batch_frames.clear();
                self.observations.clear();
            }
            Component::Debouncer => self.debouncer.reset(),
            Component::ProactiveAgent => {
                if let Some(p) = self.agent.cancel_pending() {
                    let now = self.now();
                    self.emit(
                        MessageType::Silent,
                        &SilentEvent {
                            ts_ms: now,
                            reason: SilentReason::SessionStop,
                            correlation_id: p.correlation_id,
                            waited_ms: Some(now.saturating_sub(p.since_ms)),
                        },
                    );
                }
            }
            Component::UserModel | Component::ContextClassifier => {}
        }
    }

    fn finish(&mut self) {
        let c = &self.counters;
        let summary = SessionSummary {
            frames_received: c.frames_received,
            frames_kept: c.frames_kept,
            frames_dropped: c.frames_dropped,
            frames_unbatched: c.frames_unbatched,
            batches: c.batches,
            observations: c.observations,
            nudges: c.nudge_count(),
        };
        self.emit(MessageType::SessionStop, &summary);
        self.stopped = true;
    }
}
