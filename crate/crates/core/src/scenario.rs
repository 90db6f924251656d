//! Deterministic replay of scripted sessions on a simulated clock.
//!
//! A [`Script`] lists timed events (camera frames, user speech, injections)
//! together with scripted mock replies. [`run_script`] drives them through a
//! [`Gateway`] exactly as a client would, collects the outbound log and
//! computes [`ScenarioMetrics`]. Logs can be checked against a stored golden
//! with [`compare_golden`].

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::clock::{Clock, SimClock};
use crate::frame_source::{FrameSource, SyntheticFrame, SyntheticPattern};
use crate::gateway::payload::{FrameRef, Frames, Inject, SessionStart, Utterance};
use crate::gateway::{encode, Envelope, Gateway, MessageType};
use crate::providers::{
    end_to_end_latency, Deadlines, LatencyReport, ProviderLatencyProfile, ProviderSuite, ScriptEntry,
    ScriptedReplies, TraceComponent, TraceSpan, Tracer, LATENCY_BUDGET_MS,
};
use crate::proactive_agent::TriggerReason;
use crate::session::{Session, SessionConfig};
use crate::user_model::UserProfile;

pub const SCRIPT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid script: {0}")]
    ScriptInvalid(String),
    #[error("unsupported script version {0}")]
    Version(u32),
    #[error("missing asset: {0}")]
    MissingAsset(String),
    #[error("golden log {0} does not exist")]
    GoldenMissing(PathBuf),
    #[error("golden log {path} line {line}: {message}")]
    GoldenCorrupt { path: PathBuf, line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Script {
    pub version: u32,
    pub name: String,
    #[serde(default = "default_session_id")]
    pub session_id: String,
    pub profile: UserProfile,
    #[serde(default)]
    pub config: SessionConfig,
    #[serde(default)]
    pub latency: ProviderLatencyProfile,
    #[serde(default)]
    pub deadlines: Deadlines,
    #[serde(default)]
    pub mocks: MockScripts,
    pub events: Vec<TimedEvent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expectations: Option<Expectations>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectations {
    /// Golden session log, relative to the script file.
    pub golden: PathBuf,
}

fn default_session_id() -> String {
    "scenario".to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockScripts {
    #[serde(default)]
    pub describe: Vec<ScriptEntry>,
    #[serde(default)]
    pub classifier: Vec<ScriptEntry>,
    #[serde(default)]
    pub agent: Vec<ScriptEntry>,
    /// Without strict mode an exhausted script falls back to a neutral reply.
    #[serde(default = "default_true")]
    pub strict: bool,
}

fn default_true() -> bool {
    true
}

impl Default for MockScripts {
    fn default() -> Self {
        Self {
            describe: Vec::new(),
            classifier: Vec::new(),
            agent: Vec::new(),
            strict: true,
        }
    }
}

pub const FALLBACK_DESCRIPTION: &str = "The scene is unclear.";
pub const FALLBACK_CLASSIFICATION: &str = "Output: unsure";
pub const FALLBACK_AGENT_REPLY: &str = "[SILENT]";

impl MockScripts {
    fn replies(&self, entries: &[ScriptEntry], fallback: &str) -> ScriptedReplies {
        if self.strict {
            ScriptedReplies::strict(entries.to_vec())
        } else {
            ScriptedReplies::lenient(entries.to_vec(), fallback)
        }
    }

    /// Fresh mock providers on any clock. Each call starts the reply queues over.
    pub fn build_with_clock(&self, clock: Arc<dyn Clock>, tracer: Tracer, latency: ProviderLatencyProfile) -> ProviderSuite {
        ProviderSuite::mocks(
            clock,
            tracer,
            latency,
            self.replies(&self.describe, FALLBACK_DESCRIPTION),
            self.replies(&self.classifier, FALLBACK_CLASSIFICATION),
            self.replies(&self.agent, FALLBACK_AGENT_REPLY),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedEvent {
    pub at_ms: u64,
    #[serde(flatten)]
    pub event: ScriptEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScriptEvent {
    /// `count` frames at the camera rate. Noise seeds advance per frame.
    Frames {
        count: u64,
        pattern: SyntheticPattern,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        width: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        height: Option<usize>,
    },
    /// One frame from an explicit source, such as an image file.
    Frame { source: FrameSource },
    Utterance {
        text: String,
        #[serde(default)]
        duration_ms: u64,
    },
    OtherSpeaker {
        active: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        text: Option<String>,
    },
    Scene { description: String },
    Remind { text: String },
    Stop,
}

impl Script {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let script: Script = serde_json::from_str(text).map_err(|e| ScenarioError::ScriptInvalid(e.to_string()))?;
        if script.version != SCRIPT_VERSION {
            return Err(ScenarioError::Version(script.version));
        }
        Ok(script)
    }

    /// Loads a script and resolves relative frame paths against its directory.
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut script = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(exp) = &mut script.expectations {
            exp.golden = base.join(&exp.golden);
        }
        for ev in &mut script.events {
            if let ScriptEvent::Frame { source } = &mut ev.event {
                *source = source.resolved(base);
            }
        }
        Ok(script)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.profile
            .validate()
            .map_err(|e| ScenarioError::ScriptInvalid(format!("profile: {e}")))?;
        let mut last = 0;
        for (i, ev) in self.events.iter().enumerate() {
            if ev.at_ms < last {
                return Err(ScenarioError::ScriptInvalid(format!(
                    "event {i} at {} ms precedes the previous event at {last} ms",
                    ev.at_ms
                )));
            }
            last = ev.at_ms;
            if let ScriptEvent::Frame { source } = &ev.event {
                source
                    .check_exists()
                    .map_err(|e| ScenarioError::MissingAsset(format!("event {i}: {e}")))?;
            }
            if let ScriptEvent::Frames { count: 0, .. } = &ev.event {
                return Err(ScenarioError::ScriptInvalid(format!("event {i} has no frames")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NudgeRecord {
    pub ts_ms: u64,
    pub decided_at_ms: u64,
    pub trigger_reason: TriggerReason,
    pub text: String,
    pub correlation_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionLatency {
    pub correlation_id: String,
    #[serde(flatten)]
    pub report: LatencyReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMetrics {
    pub name: String,
    pub nudge_count: u64,
    pub nudges: Vec<NudgeRecord>,
    pub trigger_reasons: BTreeMap<TriggerReason, u64>,
    pub silent: u64,
    pub abandoned: u64,
    pub superseded: u64,
    pub deferred: u64,
    pub frames_received: u64,
    pub frames_kept: u64,
    pub frames_dropped: u64,
    pub frames_unbatched: u64,
    pub batches: u64,
    pub verdicts: BTreeMap<String, u64>,
    pub errors: u64,
    pub interactions: Vec<InteractionLatency>,
    pub mean_end_to_end_ms: Option<f64>,
    pub budget_ms: u64,
    pub budget_ok: bool,
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub log: Vec<Envelope>,
    pub spans: Vec<TraceSpan>,
    pub metrics: ScenarioMetrics,
}

impl ScenarioRun {
    pub fn log_jsonl(&self) -> String {
        to_jsonl(&self.log)
    }

    pub fn responses(&self) -> impl Iterator<Item = &NudgeRecord> {
        self.metrics.nudges.iter()
    }
}

pub fn to_jsonl(log: &[Envelope]) -> String {
    let mut out = String::new();
    for env in log {
        out.push_str(&encode(env));
        out.push('\n');
    }
    out
}

struct Driver {
    gateway: Gateway,
    clock: SimClock,
    session_id: String,
    seq: u64,
    tick_ms: u64,
    next_frame_id: u64,
    frame_interval_ms: u64,
}

impl Driver {
    fn send<P: Serialize>(&mut self, kind: MessageType, payload: &P) {
        self.seq += 1;
        let env = Envelope::with_payload(kind, &self.session_id, self.seq, self.clock.now_ms(), payload);
        // the runner goes through the text codec like any client
        self.gateway.handle_text(&encode(&env));
    }

    fn pending(&self) -> bool {
        self.gateway
            .session(&self.session_id)
            .is_some_and(|s| s.has_pending_response() && !s.is_stopped())
    }

    /// Ticks a deferred response up to `until_ms`, or until it resolves when `None`.
    fn tick_until(&mut self, until_ms: Option<u64>) {
        while self.pending() {
            let next = self.clock.now_ms() + self.tick_ms;
            if until_ms.is_some_and(|u| next > u) {
                break;
            }
            self.clock.advance_to(next);
            self.gateway.tick(&self.session_id);
        }
    }

    fn frame(&mut self, ts_ms: u64, source: FrameSource) {
        let frame_id = self.next_frame_id;
        self.next_frame_id += 1;
        self.send(
            MessageType::FrameBatch,
            &Frames {
                frames: vec![FrameRef { frame_id, ts_ms, source }],
            },
        );
    }

    fn play(&mut self, ev: &TimedEvent) {
        self.tick_until(Some(ev.at_ms));
        self.clock.advance_to(ev.at_ms);
        match &ev.event {
            ScriptEvent::Frames {
                count,
                pattern,
                width,
                height,
            } => {
                for i in 0..*count {
                    let ts = ev.at_ms + i * self.frame_interval_ms;
                    self.tick_until(Some(ts));
                    self.clock.advance_to(ts);
                    let pattern = match pattern {
                        SyntheticPattern::Noise { seed } => SyntheticPattern::Noise {
                            seed: seed.wrapping_add(self.next_frame_id),
                        },
                        other => *other,
                    };
                    let mut frame = SyntheticFrame {
                        pattern,
                        width: 32,
                        height: 24,
                    };
                    if let Some(w) = width {
                        frame.width = *w;
                    }
                    if let Some(h) = height {
                        frame.height = *h;
                    }
                    self.frame(ts, FrameSource::Synthetic(frame));
                }
            }
            ScriptEvent::Frame { source } => self.frame(ev.at_ms, source.clone()),
            ScriptEvent::Utterance { text, duration_ms } => self.send(
                MessageType::UserUtterance,
                &Utterance {
                    text: text.clone(),
                    duration_ms: *duration_ms,
                },
            ),
            ScriptEvent::OtherSpeaker { active, text } => self.send(
                MessageType::Inject,
                &Inject::OtherSpeakerToggle {
                    active: Some(*active),
                    text: text.clone(),
                },
            ),
            ScriptEvent::Scene { description } => self.send(
                MessageType::Inject,
                &Inject::Scene {
                    description: description.clone(),
                },
            ),
            ScriptEvent::Remind { text } => self.send(MessageType::Inject, &Inject::Remind { text: text.clone() }),
            ScriptEvent::Stop => self.send(MessageType::SessionStop, &serde_json::Map::new()),
        }
    }
}

/// Replays a script from a fresh state. Identical scripts give identical logs.
pub fn run_script(script: &Script) -> Result<ScenarioRun, ScenarioError> {
    script.validate()?;
    let clock = SimClock::new();
    let tracer = Tracer::new(&script.session_id);
    let providers = script
        .mocks
        .build_with_clock(Arc::new(clock.clone()), tracer, script.latency)
        .with_deadlines(script.deadlines);
    let config = script.config;
    let mut providers = Some(providers);
    let gateway = Gateway::new(move |id: &str, profile: UserProfile| {
        let providers = providers.take().expect("scenario runs a single session");
        Session::new(id, profile, config, providers)
    });
    let mut driver = Driver {
        gateway,
        clock,
        session_id: script.session_id.clone(),
        seq: 0,
        tick_ms: config.tick_ms,
        next_frame_id: 0,
        frame_interval_ms: config.camera.frame_interval_ms(),
    };
    driver.send(
        MessageType::SessionStart,
        &SessionStart {
            profile: script.profile.clone(),
        },
    );
    if driver.gateway.session(&script.session_id).is_none() {
        return Err(ScenarioError::ScriptInvalid("session did not start".into()));
    }
    for ev in &script.events {
        driver.play(ev);
    }
    let stopped = driver.gateway.session(&script.session_id).is_some_and(Session::is_stopped);
    if !stopped {
        driver.tick_until(None);
        driver.send(MessageType::SessionStop, &serde_json::Map::new());
    }
    let session = driver.gateway.session(&script.session_id).expect("session exists");
    let log = session.log().to_vec();
    let spans = session.spans().to_vec();
    let metrics = metrics(&script.name, session, &log, &spans);
    Ok(ScenarioRun { log, spans, metrics })
}

fn metrics(name: &str, session: &Session, log: &[Envelope], spans: &[TraceSpan]) -> ScenarioMetrics {
    let c = session.counters();
    let nudges: Vec<NudgeRecord> = log
        .iter()
        .filter(|e| e.kind == MessageType::AgentResponse)
        .filter_map(|e| e.payload_as::<NudgeRecord>().ok())
        .collect();
    let mut interactions = Vec::new();
    for n in nudges.iter().filter(|n| n.trigger_reason == TriggerReason::UserSpeech) {
        let chain: Vec<TraceSpan> = spans
            .iter()
            .filter(|s| s.correlation_id == n.correlation_id && s.component != TraceComponent::Agent)
            .cloned()
            .collect();
        if let Ok(report) = end_to_end_latency(&chain) {
            interactions.push(InteractionLatency {
                correlation_id: n.correlation_id.clone(),
                report,
            });
        }
    }
    let mean_end_to_end_ms = (!interactions.is_empty())
        .then(|| interactions.iter().map(|i| i.report.total_ms as f64).sum::<f64>() / interactions.len() as f64);
    ScenarioMetrics {
        name: name.to_string(),
        nudge_count: nudges.len() as u64,
        trigger_reasons: c.nudges.clone(),
        nudges,
        silent: c.silent,
        abandoned: c.abandoned,
        superseded: c.superseded,
        deferred: c.deferred,
        frames_received: c.frames_received,
        frames_kept: c.frames_kept,
        frames_dropped: c.frames_dropped,
        frames_unbatched: c.frames_unbatched,
        batches: c.batches,
        verdicts: c.verdicts.clone(),
        errors: c.errors,
        budget_ms: LATENCY_BUDGET_MS,
        budget_ok: interactions.iter().all(|i| i.report.budget_ok),
        interactions,
        mean_end_to_end_ms,
    }
}

/// First point where an actual log departs from its golden.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Divergence {
    pub index: usize,
    pub seq: Option<u64>,
    pub fields: Vec<String>,
    pub expected: Option<Value>,
    pub actual: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoldenDiff {
    pub expected_events: usize,
    pub actual_events: usize,
    pub first_divergence: Option<Divergence>,
    pub missing: usize,
    pub extra: usize,
}

impl GoldenDiff {
    pub fn matches(&self) -> bool {
        self.first_divergence.is_none()
    }
}

impl std::fmt::Display for GoldenDiff {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.first_divergence {
            None => write!(f, "log matches golden ({} events)", self.actual_events),
            Some(d) => {
                write!(f, "first divergence at event {}", d.index)?;
                if let Some(seq) = d.seq {
                    write!(f, " (seq {seq})")?;
                }
                if !d.fields.is_empty() {
                    write!(f, " in {}", d.fields.join(", "))?;
                }
                write!(
                    f,
                    "; {} expected, {} actual, {} missing, {} extra",
                    self.expected_events, self.actual_events, self.missing, self.extra
                )
            }
        }
    }
}

fn differing_fields(prefix: &str, expected: &Value, actual: &Value, out: &mut Vec<String>) {
    match (expected, actual) {
        (Value::Object(a), Value::Object(b)) => {
            let mut keys: Vec<&String> = a.keys().chain(b.keys()).collect();
            keys.sort();
            keys.dedup();
            for k in keys {
                let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                match (a.get(k), b.get(k)) {
                    (Some(x), Some(y)) => differing_fields(&path, x, y, out),
                    _ => out.push(path),
                }
            }
        }
        (x, y) if x != y => out.push(if prefix.is_empty() { "$".into() } else { prefix.to_string() }),
        _ => {}
    }
}

pub fn diff_logs(expected: &[Value], actual: &[Value]) -> GoldenDiff {
    let common = expected.len().min(actual.len());
    let mut first_divergence = None;
    for i in 0..common {
        let mut fields = Vec::new();
        differing_fields("", &expected[i], &actual[i], &mut fields);
        if !fields.is_empty() {
            first_divergence = Some(Divergence {
                index: i,
                seq: actual[i].get("seq").and_then(Value::as_u64),
                fields,
                expected: Some(expected[i].clone()),
                actual: Some(actual[i].clone()),
            });
            break;
        }
    }
    if first_divergence.is_none() && expected.len() != actual.len() {
        first_divergence = Some(Divergence {
            index: common,
            seq: actual.get(common).and_then(|v| v.get("seq")).and_then(Value::as_u64),
            fields: Vec::new(),
            expected: expected.get(common).cloned(),
            actual: actual.get(common).cloned(),
        });
    }
    GoldenDiff {
        expected_events: expected.len(),
        actual_events: actual.len(),
        first_divergence,
        missing: expected.len().saturating_sub(actual.len()),
        extra: actual.len().saturating_sub(expected.len()),
    }
}

pub fn read_golden(path: &Path) -> Result<Vec<Value>, ScenarioError> {
    if !path.exists() {
        return Err(ScenarioError::GoldenMissing(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| ScenarioError::GoldenCorrupt {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn compare_golden(log: &[Envelope], golden: &Path) -> Result<GoldenDiff, ScenarioError> {
    let expected = read_golden(golden)?;
    let actual: Vec<Value> = log
        .iter()
        .map(|e| serde_json::to_value(e).expect("envelope serializes"))
        .collect();
    Ok(diff_logs(&expected, &actual))
}

pub fn write_log(log: &[Envelope], path: &Path) -> Result<(), ScenarioError> {
    let io = |source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(to_jsonl(log).as_bytes()).map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn profile() -> UserProfile {
        crate::user_model::create_profile(
            "stay focused",
            "a developer",
            "voice-a",
            crate::user_model::ProfileOverrides {
                user_id: Some("u1".into()),
                ..Default::default()
            },
        )
        .unwrap()
    }

    fn script(events: Vec<TimedEvent>, mocks: MockScripts) -> Script {
        Script {
            version: 1,
            name: "t".into(),
            session_id: "s".into(),
            profile: profile(),
            config: SessionConfig::default(),
            latency: ProviderLatencyProfile::default(),
            deadlines: Deadlines::default(),
            mocks,
            events,
            expectations: None,
        }
    }

    fn at(at_ms: u64, event: ScriptEvent) -> TimedEvent {
        TimedEvent { at_ms, event }
    }

    fn kinds(run: &ScenarioRun) -> Vec<MessageType> {
        run.log
            .iter()
            .map(|e| e.kind)
            .filter(|k| *k != MessageType::Trace)
            .collect()
    }

    #[test]
    fn event_json_shape() {
        let ev: TimedEvent = serde_json::from_value(json!({
            "at_ms": 200, "kind": "frames", "count": 10, "pattern": {"kind": "noise", "seed": 4}
        }))
        .unwrap();
        assert_eq!(ev.at_ms, 200);
        assert!(matches!(ev.event, ScriptEvent::Frames { count: 10, .. }));
        let stop: TimedEvent = serde_json::from_value(json!({"at_ms": 9, "kind": "stop"})).unwrap();
        assert_eq!(stop.event, ScriptEvent::Stop);
    }

    #[test]
    fn rejects_wrong_version_and_unordered_events() {
        let mut s = script(vec![], MockScripts::default());
        s.version = 2;
        let text = serde_json::to_string(&s).unwrap();
        assert!(matches!(Script::from_json(&text), Err(ScenarioError::Version(2))));

        let s = script(
            vec![at(500, ScriptEvent::Stop), at(100, ScriptEvent::Stop)],
            MockScripts::default(),
        );
        assert!(matches!(run_script(&s), Err(ScenarioError::ScriptInvalid(_))));
    }

    #[test]
    fn sharp_batch_flows_to_a_spoken_nudge() {
        let mocks = MockScripts {
            describe: vec![ScriptEntry::reply("A phone lies on the desk.")],
            classifier: vec![ScriptEntry::reply("Output: yes")],
            agent: vec![ScriptEntry::reply("Phone down, back to it.")],
            strict: true,
        };
        let run = run_script(&script(
            vec![at(
                0,
                ScriptEvent::Frames {
                    count: 10,
                    pattern: SyntheticPattern::Noise { seed: 1 },
                    width: None,
                    height: None,
                },
            )],
            mocks,
        ))
        .unwrap();
        assert_eq!(
            kinds(&run),
            vec![
                MessageType::SessionStart,
                MessageType::FrameBatch,
                MessageType::SceneObservation,
                MessageType::ContextVerdict,
                MessageType::DebounceDecision,
                MessageType::NewInfoInjected,
                MessageType::AgentResponse,
                MessageType::SessionStop,
            ]
        );
        assert_eq!(run.metrics.nudge_count, 1);
        assert_eq!(run.metrics.frames_kept, 10);
        assert_eq!(run.metrics.nudges[0].trigger_reason, TriggerReason::ContextChange);
        let seqs: Vec<u64> = run.log.iter().map(|e| e.seq).collect();
        assert!(seqs.windows(2).all(|w| w[1] == w[0] + 1));
    }

    #[test]
    fn utterance_latency_matches_profile() {
        let mocks = MockScripts {
            agent: vec![ScriptEntry::reply("Sure, one thing at a time.")],
            ..Default::default()
        };
        let run = run_script(&script(
            vec![at(
                1000,
                ScriptEvent::Utterance {
                    text: "what next".into(),
                    duration_ms: 800,
                },
            )],
            mocks,
        ))
        .unwrap();
        assert_eq!(run.metrics.interactions.len(), 1);
        assert_eq!(run.metrics.interactions[0].report.total_ms, 920);
        assert_eq!(run.metrics.mean_end_to_end_ms, Some(920.0));
        assert!(run.metrics.budget_ok);
    }

    #[test]
    fn diff_reports_first_divergent_field() {
        let a = vec![json!({"seq": 0, "payload": {"text": "x"}}), json!({"seq": 1})];
        let b = vec![json!({"seq": 0, "payload": {"text": "y"}})];
        let d = diff_logs(&a, &b);
        let div = d.first_divergence.clone().unwrap();
        assert_eq!(div.index, 0);
        assert_eq!(div.fields, vec!["payload.text".to_string()]);
        assert_eq!(d.missing, 1);
        assert!(diff_logs(&a, &a).matches());
        let d = diff_logs(&a[..1], &a);
        assert_eq!((d.extra, d.first_divergence.unwrap().index), (1, 1));
    }

    #[test]
    fn missing_golden_is_an_error() {
        let err = compare_golden(&[], Path::new("/nonexistent/golden.jsonl")).unwrap_err();
        assert!(matches!(err, ScenarioError::GoldenMissing(_)));
    }
}
