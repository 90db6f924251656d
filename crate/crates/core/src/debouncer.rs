//! Gate between relevance verdicts and spoken responses.
//!
//! A YES fires when it differs from the previous effective state, or when the
//! step counter hits the interval modulus. UNSURE never fires and leaves the
//! previous effective state in place.

use serde::{Deserialize, Serialize};

use crate::context_classifier::Verdict;

pub const DEFAULT_INTERVAL_MODULUS: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DebounceConfig {
    pub interval_modulus: u64,
}

impl Default for DebounceConfig {
    fn default() -> Self {
        Self {
            interval_modulus: DEFAULT_INTERVAL_MODULUS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DebounceReason {
    StateChange,
    Interval,
    Suppressed,
    NotRelevant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DebounceDecision {
    pub trigger: bool,
    pub reason: DebounceReason,
    pub step: u64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DebounceState {
    config: DebounceConfig,
    prev_verdict: Verdict,
    step_counter: u64,
}

impl Default for DebounceState {
    fn default() -> Self {
        Self::new(DebounceConfig::default())
    }
}

impl DebounceState {
    pub fn new(config: DebounceConfig) -> Self {
        assert!(config.interval_modulus > 0, "interval modulus must be positive");
        Self {
            config,
            prev_verdict: Verdict::No,
            step_counter: 0,
        }
    }

    pub fn prev_verdict(&self) -> Verdict {
        self.prev_verdict
    }

    pub fn step_counter(&self) -> u64 {
        self.step_counter
    }

    pub fn step(&mut self, verdict: Verdict) -> DebounceDecision {
        self.step_counter += 1;
        let step = self.step_counter;
        let prev = self.prev_verdict;
        let (trigger, reason) = match verdict {
            Verdict::Unsure => (
                false,
                if prev == Verdict::Yes {
                    DebounceReason::Suppressed
                } else {
                    DebounceReason::NotRelevant
                },
            ),
            Verdict::No => (false, DebounceReason::NotRelevant),
            Verdict::Yes if prev != Verdict::Yes => (true, DebounceReason::StateChange),
            Verdict::Yes if step.is_multiple_of(self.config.interval_modulus) => (true, DebounceReason::Interval),
            Verdict::Yes => (false, DebounceReason::Suppressed),
        };
        if verdict != Verdict::Unsure {
            self.prev_verdict = verdict;
        }
        DebounceDecision {
            trigger,
            reason,
            step,
            verdict,
        }
    }

    pub fn reset(&mut self) {
        self.prev_verdict = Verdict::No;
        self.step_counter = 0;
    }

    /// Test hook for positioning the counter.
    #[doc(hidden)]
    pub fn with_state(config: DebounceConfig, prev_verdict: Verdict, step_counter: u64) -> Self {
        assert_ne!(prev_verdict, Verdict::Unsure);
        Self {
            config,
            prev_verdict,
            step_counter,
        }
    }
}
