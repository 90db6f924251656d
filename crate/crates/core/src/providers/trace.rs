use std::io::Write;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// End-to-end budget for one spoken interaction.
pub const LATENCY_BUDGET_MS: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceComponent {
    Stt,
    Mllm,
    Tts,
    Classifier,
    Agent,
}

impl std::fmt::Display for TraceComponent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            TraceComponent::Stt => "stt",
            TraceComponent::Mllm => "mllm",
            TraceComponent::Tts => "tts",
            TraceComponent::Classifier => "classifier",
            TraceComponent::Agent => "agent",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceSpan {
    pub component: TraceComponent,
    pub start_ms: u64,
    pub end_ms: u64,
    pub session_id: String,
    pub correlation_id: String,
    pub ok: bool,
}

impl TraceSpan {
    pub fn duration_ms(&self) -> u64 {
        self.end_ms.saturating_sub(self.start_ms)
    }
}

/// Append-only span sink shared by everything in one session.
#[derive(Debug, Clone, Default)]
pub struct Tracer {
    session_id: Arc<str>,
    spans: Arc<Mutex<Vec<TraceSpan>>>,
}

impl Tracer {
    pub fn new(session_id: &str) -> Self {
        Self {
            session_id: session_id.into(),
            spans: Arc::default(),
        }
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn record(&self, span: TraceSpan) {
        debug_assert!(span.end_ms >= span.start_ms);
        self.spans.lock().expect("tracer lock").push(span);
    }

    pub fn spans(&self) -> Vec<TraceSpan> {
        self.spans.lock().expect("tracer lock").clone()
    }

    /// Removes and returns spans recorded since the last drain.
    pub fn drain(&self) -> Vec<TraceSpan> {
        std::mem::take(&mut *self.spans.lock().expect("tracer lock"))
    }

    pub fn chain(&self, correlation_id: &str) -> Vec<TraceSpan> {
        self.spans
            .lock()
            .expect("tracer lock")
            .iter()
            .filter(|s| s.correlation_id == correlation_id)
            .cloned()
            .collect()
    }
}

/// Writes one JSON object per line.
pub fn write_jsonl<W: Write>(spans: &[TraceSpan], mut out: W) -> std::io::Result<()> {
    for span in spans {
        serde_json::to_writer(&mut out, span)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("trace is missing a {0} span")]
    IncompleteTrace(TraceComponent),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub stt_ms: u64,
    pub mllm_ms: u64,
    pub tts_ms: u64,
    pub total_ms: u64,
    pub budget_ok: bool,
}

/// Sums the speech-to-text, model and synthesis spans of one interaction chain.
pub fn end_to_end_latency(chain: &[TraceSpan]) -> Result<LatencyReport, TraceError> {
    let sum = |c: TraceComponent| -> Result<u64, TraceError> {
        let mut found = false;
        let mut total = 0;
        for s in chain.iter().filter(|s| s.component == c) {
            found = true;
            total += s.duration_ms();
        }
        if found {
            Ok(total)
        } else {
            Err(TraceError::IncompleteTrace(c))
        }
    };
    let stt_ms = sum(TraceComponent::Stt)?;
    let mllm_ms = sum(TraceComponent::Mllm)?;
    let tts_ms = sum(TraceComponent::Tts)?;
    let total_ms = stt_ms + mllm_ms + tts_ms;
    Ok(LatencyReport {
        stt_ms,
        mllm_ms,
        tts_ms,
        total_ms,
        budget_ok: total_ms < LATENCY_BUDGET_MS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn span(component: TraceComponent, start_ms: u64, width: u64) -> TraceSpan {
        TraceSpan {
            component,
            start_ms,
            end_ms: start_ms + width,
            session_id: "s".into(),
            correlation_id: "u0".into(),
            ok: true,
        }
    }

    #[test]
    fn default_profile_chain_is_920() {
        let chain = [
            span(TraceComponent::Stt, 0, 100),
            span(TraceComponent::Mllm, 100, 450),
            span(TraceComponent::Tts, 550, 370),
        ];
        let r = end_to_end_latency(&chain).unwrap();
        assert_eq!(r.total_ms, 920);
        assert!(r.budget_ok);
    }

    #[test]
    fn slow_model_breaks_budget() {
        let chain = [
            span(TraceComponent::Stt, 0, 100),
            span(TraceComponent::Mllm, 100, 900),
            span(TraceComponent::Tts, 1000, 370),
        ];
        let r = end_to_end_latency(&chain).unwrap();
        assert_eq!(r.total_ms, 1370);
        assert!(!r.budget_ok);
    }

    #[test]
    fn missing_tts_is_incomplete() {
        let chain = [span(TraceComponent::Stt, 0, 100), span(TraceComponent::Mllm, 100, 450)];
        assert_eq!(
            end_to_end_latency(&chain),
            Err(TraceError::IncompleteTrace(TraceComponent::Tts))
        );
    }

    #[test]
    fn classifier_and_agent_spans_are_not_counted() {
        let chain = [
            span(TraceComponent::Stt, 0, 100),
            span(TraceComponent::Classifier, 100, 450),
            span(TraceComponent::Mllm, 550, 450),
            span(TraceComponent::Tts, 1000, 370),
            span(TraceComponent::Agent, 0, 1370),
        ];
        assert_eq!(end_to_end_latency(&chain).unwrap().total_ms, 920);
    }

    #[test]
    fn jsonl_has_one_line_per_span() {
        let spans = [span(TraceComponent::Stt, 0, 1), span(TraceComponent::Tts, 1, 2)];
        let mut buf = Vec::new();
        write_jsonl(&spans, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        let back: TraceSpan = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(back, spans[0]);
    }
}
