//! Goal-relevance classification of scene observations.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::perception::{batch_correlation_id, SceneObservation};
use crate::proactive_agent::{ConversationTurn, TurnRole};
use crate::providers::{ProviderError, ProviderSuite};

const CLASSIFIER_TEMPLATE: &str = include_str!("../assets/classifier_template.txt");

/// Fills the template's question slot.
pub const RELEVANCE_QUESTION: &str = "Is the observed situation relevant to the user's goal?";

pub const DEFAULT_HISTORY_TURNS: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClassifierError {
    #[error("observation text is empty")]
    EmptyObservation,
    #[error("no yes/no/unsure token in classifier output {0:?}")]
    UnparseableVerdict(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Yes,
    No,
    Unsure,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Yes => "YES",
            Verdict::No => "NO",
            Verdict::Unsure => "UNSURE",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextState {
    pub verdict: Verdict,
    pub batch_id: u64,
    /// Batch id of the observation that was classified.
    pub observation_ref: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnippetTurn<'a> {
    User(&'a str),
    Assistant(&'a str),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassifierWindow {
    /// Full goal sentence as shown after `[Goal]:`.
    pub goal: String,
    /// Oldest first.
    pub turns: Vec<(TurnRole, String)>,
    pub observation: String,
}

impl ClassifierWindow {
    /// Goal sentence in the phrasing used by the few-shot examples.
    pub fn goal_statement(profile_goal: &str) -> String {
        let goal = profile_goal.trim().trim_end_matches('.');
        format!("The user is trying to {goal}.")
    }

    /// Keeps the last `k` user/assistant turns; system injections are not part of the snippet.
    pub fn from_history(profile_goal: &str, history: &[ConversationTurn], k: usize, observation: &str) -> Self {
        let spoken: Vec<_> = history
            .iter()
            .filter(|t| matches!(t.role, TurnRole::User | TurnRole::Assistant))
            .collect();
        let start = spoken.len().saturating_sub(k);
        Self {
            goal: Self::goal_statement(profile_goal),
            turns: spoken[start..].iter().map(|t| (t.role, t.text.clone())).collect(),
            observation: observation.to_string(),
        }
    }
}

fn render_snippet(goal: &str, turns: &[SnippetTurn<'_>], observation: &str) -> String {
    let mut blocks = vec![format!("[Goal]: {goal}")];
    for turn in turns {
        blocks.push(match turn {
            SnippetTurn::User(t) => format!("[USER]: {t}"),
            SnippetTurn::Assistant(t) => format!("[ASSISTANT]: {t}"),
        });
    }
    blocks.push(format!("[*OBSERVATION*]: {observation}"));
    blocks.join("\n\n")
}

pub struct FewShotExample {
    pub goal: &'static str,
    pub turns: &'static [SnippetTurn<'static>],
    pub observation: &'static str,
    pub label: Verdict,
}

const EAT_HEALTHY: &str = "The user is trying to eat healthy and become more active.";
const STAY_FOCUSED: &str = "The user is to stay focused during work, avoid distractions, and remember to take breaks.";
const HUNGRY_EXCHANGE: &[SnippetTurn<'static>] = &[
    SnippetTurn::User("I am feeling hungry."),
    SnippetTurn::Assistant(
        "Those chicken flavored crackers look tempting, but I know I'll feel better if I grab a handful of almonds instead.",
    ),
];

pub const FEW_SHOT_EXAMPLES: [FewShotExample; 6] = [
    FewShotExample {
        goal: EAT_HEALTHY,
        turns: &[],
        observation: "The scene appears to be in a casual indoor setting, possibly a kitchen or dining area, with a bag of chicken-flavored crackers prominently displayed on a table. A mug is visible in the background, suggesting someone might be having a snack or preparing a meal.",
        label: Verdict::Yes,
    },
    FewShotExample {
        goal: EAT_HEALTHY,
        turns: &[],
        observation: "The scene appears to be in a casual indoor setting, possibly a café or office, with a table holding a drink, a smartphone, and a bag of chips. There are also some sketches or notes on paper, suggesting someone might be working or studying.",
        label: Verdict::No,
    },
    FewShotExample {
        goal: EAT_HEALTHY,
        turns: HUNGRY_EXCHANGE,
        observation: "The scene appears to be in an office or home workspace with a computer monitor and a laptop visible. Nearby, there is a table with a potted plant, a mug, and some fruits, suggesting a casual setting with snacks and beverages.",
        label: Verdict::Yes,
    },
    FewShotExample {
        goal: EAT_HEALTHY,
        turns: HUNGRY_EXCHANGE,
        observation: "The scene appears to be an office or workspace with a computer monitor and a laptop on a desk, accompanied by a potted plant with long, slender leaves. The setting is likely indoors, with a modern and organized atmosphere.",
        label: Verdict::No,
    },
    FewShotExample {
        goal: STAY_FOCUSED,
        turns: &[],
        observation: "The scene shows a close-up view of a carpeted floor with a black cable and the edge of a plate, suggesting the person might be sitting on the floor, possibly eating or setting up a meal. The setting appears casual and informal, likely in a home or office environment.",
        label: Verdict::No,
    },
    FewShotExample {
        goal: STAY_FOCUSED,
        turns: &[],
        observation: "The scene is set in an office or study area with a carpeted floor, where a person is holding a smartphone and browsing through various apps or social media content. A laptop is open on the floor nearby, suggesting a multitasking environment with a focus on digital interaction.",
        label: Verdict::Yes,
    },
];

impl FewShotExample {
    pub fn window(&self) -> ClassifierWindow {
        ClassifierWindow {
            goal: self.goal.to_string(),
            turns: self
                .turns
                .iter()
                .map(|t| match t {
                    SnippetTurn::User(s) => (TurnRole::User, s.to_string()),
                    SnippetTurn::Assistant(s) => (TurnRole::Assistant, s.to_string()),
                })
                .collect(),
            observation: self.observation.to_string(),
        }
    }

    pub fn labeled_output(&self) -> String {
        format!("Output: {}", self.label.to_string().to_lowercase())
    }
}

fn render_examples() -> String {
    FEW_SHOT_EXAMPLES
        .iter()
        .enumerate()
        .map(|(i, ex)| {
            format!(
                "Example {}\n\n{}\n\n{}",
                i + 1,
                render_snippet(ex.goal, ex.turns, ex.observation),
                ex.labeled_output()
            )
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

pub fn build_classifier_prompt(window: &ClassifierWindow) -> Result<String, ClassifierError> {
    let observation = window.observation.trim();
    if observation.is_empty() {
        return Err(ClassifierError::EmptyObservation);
    }
    let turns: Vec<SnippetTurn<'_>> = window
        .turns
        .iter()
        .filter_map(|(role, text)| match role {
            TurnRole::User => Some(SnippetTurn::User(text)),
            TurnRole::Assistant => Some(SnippetTurn::Assistant(text)),
            TurnRole::System => None,
        })
        .collect();
    let snippet = render_snippet(&window.goal, &turns, observation);
    Ok(CLASSIFIER_TEMPLATE
        .replacen("{prompt}", RELEVANCE_QUESTION, 1)
        .replacen("{examples}", &render_examples(), 1)
        .replacen("{snippet}", &snippet, 1))
}

/// The last standalone yes/no/unsure token wins, case-insensitively.
pub fn parse_classifier_output(text: &str) -> Result<Verdict, ClassifierError> {
    text.split(|c: char| !c.is_alphanumeric())
        .rev()
        .find_map(|tok| match tok.to_ascii_lowercase().as_str() {
            "yes" => Some(Verdict::Yes),
            "no" => Some(Verdict::No),
            "unsure" => Some(Verdict::Unsure),
            _ => None,
        })
        .ok_or_else(|| ClassifierError::UnparseableVerdict(text.to_string()))
}

/// Result of one classification, including why it degraded to UNSURE if it did.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Classification {
    pub state: ContextState,
    pub raw_output: Option<String>,
    pub failure: Option<ClassifierFailure>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClassifierFailure {
    Provider(ProviderError),
    Parse(ClassifierError),
}

impl ClassifierFailure {
    pub fn code(&self) -> &'static str {
        match self {
            ClassifierFailure::Provider(e) => e.code(),
            ClassifierFailure::Parse(ClassifierError::EmptyObservation) => "EmptyObservation",
            ClassifierFailure::Parse(ClassifierError::UnparseableVerdict(_)) => "UnparseableVerdict",
        }
    }
}

/// Never fails: provider and parse problems degrade to UNSURE.
pub fn classify(
    observation: &SceneObservation,
    profile_goal: &str,
    history: &[ConversationTurn],
    history_turns: usize,
    providers: &ProviderSuite,
) -> Classification {
    let unsure = |raw: Option<String>, failure: ClassifierFailure| Classification {
        state: ContextState {
            verdict: Verdict::Unsure,
            batch_id: observation.batch_id,
            observation_ref: observation.batch_id,
        },
        raw_output: raw,
        failure: Some(failure),
    };
    let window = ClassifierWindow::from_history(profile_goal, history, history_turns, &observation.description);
    let prompt = match build_classifier_prompt(&window) {
        Ok(p) => p,
        Err(e) => return unsure(None, ClassifierFailure::Parse(e)),
    };
    let raw = match providers.classify(&prompt, &batch_correlation_id(observation.batch_id)) {
        Ok(r) => r,
        Err(e) => {
            tracing::warn!(batch_id = observation.batch_id, error = %e, "classifier call failed");
            return unsure(None, ClassifierFailure::Provider(e));
        }
    };
    match parse_classifier_output(&raw) {
        Ok(verdict) => Classification {
            state: ContextState {
                verdict,
                batch_id: observation.batch_id,
                observation_ref: observation.batch_id,
            },
            raw_output: Some(raw),
            failure: None,
        },
        Err(e) => {
            tracing::warn!(batch_id = observation.batch_id, "unparseable classifier output");
            unsure(Some(raw), ClassifierFailure::Parse(e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_labeled_outputs() {
        assert_eq!(parse_classifier_output("Output: yes"), Ok(Verdict::Yes));
        assert_eq!(parse_classifier_output("Output: no"), Ok(Verdict::No));
        assert_eq!(parse_classifier_output("OUTPUT: Unsure."), Ok(Verdict::Unsure));
        assert_eq!(parse_classifier_output("no wait, yes"), Ok(Verdict::Yes));
        assert_eq!(parse_classifier_output("yes. Final answer: no"), Ok(Verdict::No));
    }

    #[test]
    fn tokens_inside_words_do_not_count() {
        assert!(matches!(
            parse_classifier_output("I'd say maybe?"),
            Err(ClassifierError::UnparseableVerdict(_))
        ));
        assert!(parse_classifier_output("nothing yesterday, unsurely").is_err());
    }

    #[test]
    fn prompt_contains_all_examples_in_order() {
        let prompt = build_classifier_prompt(&FEW_SHOT_EXAMPLES[0].window()).unwrap();
        let positions: Vec<usize> = (1..=6)
            .map(|i| prompt.find(&format!("Example {i}\n")).expect("example present"))
            .collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
        assert!(prompt.contains(RELEVANCE_QUESTION));
        assert!(!prompt.contains("{snippet}"));
    }

    #[test]
    fn empty_observation_rejected() {
        let w = ClassifierWindow {
            goal: "g".into(),
            turns: vec![],
            observation: "  ".into(),
        };
        assert_eq!(build_classifier_prompt(&w), Err(ClassifierError::EmptyObservation));
    }

    #[test]
    fn window_keeps_last_k_spoken_turns() {
        let history: Vec<ConversationTurn> = (0..10)
            .map(|i| ConversationTurn {
                role: match i % 3 {
                    0 => TurnRole::User,
                    1 => TurnRole::Assistant,
                    _ => TurnRole::System,
                },
                text: format!("t{i}"),
                ts_ms: i,
            })
            .collect();
        let w = ClassifierWindow::from_history("eat well", &history, 3, "obs");
        let texts: Vec<&str> = w.turns.iter().map(|(_, t)| t.as_str()).collect();
        assert_eq!(texts, vec!["t6", "t7", "t9"]);
        assert_eq!(w.goal, "The user is trying to eat well.");
        assert!(ClassifierWindow::from_history("g", &history, 0, "o").turns.is_empty());
    }
}
