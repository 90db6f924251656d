//! Scene description of filtered frame batches.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::frame_pipeline::FrameBatch;
use crate::providers::{ProviderError, ProviderSuite};

const SCENE_PROMPT: &str = include_str!("../assets/scene_prompt.txt");

pub fn scene_prompt() -> &'static str {
    SCENE_PROMPT
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneObservation {
    pub batch_id: u64,
    pub ts_ms: u64,
    pub description: String,
    pub kept_frame_ids: Vec<u64>,
}

pub fn batch_correlation_id(batch_id: u64) -> String {
    format!("batch-{batch_id}")
}

/// Describes the kept frames of `batch`; `None` when nothing survived filtering.
pub fn describe_batch(batch: &FrameBatch, providers: &ProviderSuite) -> Result<Option<SceneObservation>, ProviderError> {
    if batch.kept_frames.is_empty() {
        return Ok(None);
    }
    let description = providers.describe(&batch.kept_frames, SCENE_PROMPT, &batch_correlation_id(batch.batch_id))?;
    let description = description.trim().to_string();
    if description.is_empty() {
        return Err(ProviderError::Failed("empty scene description".into()));
    }
    Ok(Some(SceneObservation {
        batch_id: batch.batch_id,
        ts_ms: providers.clock().now_ms(),
        description,
        kept_frame_ids: batch.kept_frame_ids.clone(),
    }))
}

/// Reorders results that complete out of order back into batch-id order.
///
/// Every batch id must eventually be either `offer`ed or `skip`ped, otherwise
/// later results stay buffered.
#[derive(Debug)]
pub struct Sequencer<T> {
    next: u64,
    parked: BTreeMap<u64, Option<T>>,
}

impl<T> Default for Sequencer<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T> Sequencer<T> {
    pub fn new() -> Self {
        Self {
            next: 0,
            parked: BTreeMap::new(),
        }
    }

    /// Records the result for `batch_id` and returns everything now releasable, in order.
    pub fn offer(&mut self, batch_id: u64, item: T) -> Vec<T> {
        self.park(batch_id, Some(item))
    }

    /// Marks `batch_id` as producing nothing (empty batch or provider failure).
    pub fn skip(&mut self, batch_id: u64) -> Vec<T> {
        self.park(batch_id, None)
    }

    pub fn buffered(&self) -> usize {
        self.parked.len()
    }

    fn park(&mut self, batch_id: u64, item: Option<T>) -> Vec<T> {
        if batch_id >= self.next {
            self.parked.insert(batch_id, item);
        }
        let mut out = Vec::new();
        while let Some(slot) = self.parked.remove(&self.next) {
            out.extend(slot);
            self.next += 1;
        }
        out
    }

    pub fn reset(&mut self) {
        self.next = 0;
        self.parked.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::{Clock, SimClock};
    use crate::frame_pipeline::GrayImage;
    use crate::providers::{ScriptEntry, ScriptedReplies, TraceComponent, Tracer};
    use std::sync::Arc;

    fn suite(describe: ScriptedReplies) -> (SimClock, ProviderSuite) {
        let clock = SimClock::new();
        let shared: Arc<dyn Clock> = Arc::new(clock.clone());
        let s = ProviderSuite::mocks(
            shared,
            Tracer::new("s"),
            Default::default(),
            describe,
            ScriptedReplies::strict([]),
            ScriptedReplies::strict([]),
        );
        (clock, s)
    }

    fn batch(kept: usize) -> FrameBatch {
        FrameBatch {
            batch_id: 3,
            source_frame_ids: (30..40).collect(),
            kept_frame_ids: (30..30 + kept as u64).collect(),
            kept_frames: vec![GrayImage::filled(4, 4, 1).unwrap(); kept],
            first_ts_ms: 0,
            last_ts_ms: 1800,
        }
    }

    #[test]
    fn scene_prompt_is_fixed() {
        assert!(scene_prompt().contains("Keep it within 2 sentences."));
        assert!(scene_prompt().contains("first-person POV"));
        assert_eq!(scene_prompt(), scene_prompt());
    }

    #[test]
    fn empty_batch_is_not_described() {
        let (_, s) = suite(ScriptedReplies::strict([ScriptEntry::reply("unused")]));
        assert_eq!(describe_batch(&batch(0), &s).unwrap(), None);
        assert!(s.tracer().spans().is_empty());
    }

    #[test]
    fn mock_reply_becomes_observation() {
        let text = "The scene appears to be a snack counter with a bag of chicken-flavored crackers.";
        let (clock, s) = suite(ScriptedReplies::strict([ScriptEntry::reply(text)]));
        let obs = describe_batch(&batch(2), &s).unwrap().unwrap();
        assert_eq!(obs.description, text);
        assert_eq!(obs.kept_frame_ids, vec![30, 31]);
        assert_eq!(obs.ts_ms, 450);
        assert_eq!(clock.now_ms(), 450);
        let spans = s.tracer().spans();
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].component, TraceComponent::Mllm);
        assert_eq!(spans[0].correlation_id, "batch-3");
    }

    #[test]
    fn slow_provider_times_out() {
        let (_, s) = suite(ScriptedReplies::strict([ScriptEntry::reply("late").with_latency(2500)]));
        assert!(matches!(describe_batch(&batch(1), &s), Err(ProviderError::Timeout { .. })));
        assert!(!s.tracer().spans()[0].ok);
    }

    #[test]
    fn sequencer_restores_batch_order() {
        let mut seq = Sequencer::new();
        assert!(seq.offer(2, "c").is_empty());
        assert!(seq.offer(1, "b").is_empty());
        assert_eq!(seq.offer(0, "a"), vec!["a", "b", "c"]);
        assert!(seq.offer(4, "e").is_empty());
        assert_eq!(seq.skip(3), vec!["e"]);
        assert_eq!(seq.buffered(), 0);
    }

    #[test]
    fn concurrent_describes_emit_in_order() {
        use std::sync::mpsc;
        use std::time::Duration;
        let (tx, rx) = mpsc::channel();
        let handles: Vec<_> = (0..8u64)
            .map(|id| {
                let tx = tx.clone();
                std::thread::spawn(move || {
                    std::thread::sleep(Duration::from_millis((8 - id) * 3));
                    tx.send(id).unwrap();
                })
            })
            .collect();
        drop(tx);
        let mut seq = Sequencer::new();
        let mut out = Vec::new();
        for id in rx {
            out.extend(seq.offer(id, id));
        }
        for h in handles {
            h.join().unwrap();
        }
        assert_eq!(out, (0..8).collect::<Vec<_>>());
    }
}
