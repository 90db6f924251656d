use std::path::PathBuf;

use nudge_core::gateway::MessageType;
use nudge_core::proactive_agent::TriggerReason;
use nudge_core::scenario::{compare_golden, run_script, to_jsonl, ScenarioError, Script};

fn script_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.json"))
}

fn load(name: &str) -> Script {
    Script::load(&script_path(name)).unwrap()
}

fn texts(script: &Script) -> Vec<String> {
    run_script(script).unwrap().metrics.nudges.into_iter().map(|n| n.text).collect()
}

#[test]
fn bundled_scripts_match_their_goldens() {
    for name in ["diet", "focus", "confidence"] {
        let script = load(name);
        let run = run_script(&script).unwrap();
        let golden = script.expectations.as_ref().expect("bundled scripts name a golden").golden.clone();
        let diff = compare_golden(&run.log, &golden).unwrap();
        assert!(diff.matches(), "{name}: {diff}");
    }
}

#[test]
fn replays_are_byte_identical() {
    for name in ["diet", "focus", "confidence"] {
        let script = load(name);
        assert_eq!(run_script(&script).unwrap().log_jsonl(), run_script(&script).unwrap().log_jsonl());
    }
}

#[test]
fn diet_nudges_follow_the_story() {
    assert_eq!(
        texts(&load("diet")),
        vec![
            "My body deserves better than this.",
            "No way. I'll stick with the apples, real energy, no crash.",
            "Great choice!",
        ]
    );
}

#[test]
fn diet_is_silent_on_irrelevant_batches() {
    let run = run_script(&load("diet")).unwrap();
    let mut relevant = false;
    for env in &run.log {
        match env.kind {
            MessageType::DebounceDecision => relevant = env.payload["trigger"] == true,
            MessageType::AgentResponse => assert!(relevant, "nudge after a non-triggering decision: {env:?}"),
            _ => {}
        }
    }
    assert_eq!(run.metrics.frames_dropped, 10, "the blurry batch is filtered out");
}

#[test]
fn focus_covers_phone_and_break() {
    let run = run_script(&load("focus")).unwrap();
    let nudges: Vec<_> = run.metrics.nudges.iter().map(|n| n.text.as_str()).collect();
    assert!(nudges.contains(&"Alright. I need to put the phone down and focus on my code"));
    assert!(nudges.contains(&"Time for a quick stretch and a glass of water to stay sharp"));
    // the interval re-trigger during the phone stretch is answered with the silence sentinel
    assert_eq!(run.metrics.silent, 1);
    let reasons: Vec<_> = run
        .log
        .iter()
        .filter(|e| e.kind == MessageType::DebounceDecision && e.payload["trigger"] == true)
        .map(|e| e.payload["reason"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(reasons, ["state_change", "state_change", "interval", "state_change"]);
}

#[test]
fn confidence_defers_while_the_boss_speaks() {
    let run = run_script(&load("confidence")).unwrap();
    let m = &run.metrics;
    assert_eq!(m.deferred, 1);
    assert_eq!(m.trigger_reasons.get(&TriggerReason::UserSpeech), Some(&1));
    let last = m.nudges.last().unwrap();
    assert_eq!(last.text, "Well done. I believed in myself, and it made all the difference.");
    // the other speaker stops at 27 s; the next tick is the first quiet moment
    assert_eq!(last.decided_at_ms, 27_250);
    assert_eq!(m.interactions.len(), 1);
    assert_eq!(m.interactions[0].report.total_ms, 920);
}

#[test]
fn blurry_only_script_yields_nothing() {
    let mut script = load("diet");
    for ev in &mut script.events {
        if let nudge_core::scenario::ScriptEvent::Frames { pattern, .. } = &mut ev.event {
            *pattern = nudge_core::frame_source::SyntheticPattern::Flat { value: 90 };
        }
    }
    script.mocks.strict = false;
    let run = run_script(&script).unwrap();
    assert_eq!(run.metrics.nudge_count, 0);
    assert_eq!(run.metrics.frames_kept, 0);
    assert!(!run.log.iter().any(|e| e.kind == MessageType::SceneObservation));
}

#[test]
fn frames_are_conserved() {
    for name in ["diet", "focus", "confidence"] {
        let m = run_script(&load(name)).unwrap().metrics;
        assert_eq!(m.frames_kept + m.frames_dropped + m.frames_unbatched, m.frames_received, "{name}");
        assert_eq!(m.batches * 10, m.frames_kept + m.frames_dropped, "{name}");
    }
}

#[test]
fn golden_diff_flags_an_extra_nudge() {
    let script = load("diet");
    let run = run_script(&script).unwrap();
    let mut log = run.log.clone();
    let extra = log.iter().find(|e| e.kind == MessageType::AgentResponse).unwrap().clone();
    let at = log.len() - 1;
    log.insert(at, extra);
    let dir = tempfile::tempdir().unwrap();
    let golden = dir.path().join("golden.jsonl");
    std::fs::write(&golden, to_jsonl(&run.log)).unwrap();
    let diff = compare_golden(&log, &golden).unwrap();
    let d = diff.first_divergence.clone().unwrap();
    assert_eq!(d.index, at);
    assert_eq!(d.actual.unwrap()["type"], "agent_response");
    assert_eq!(diff.extra, 1);

    let mut swapped = run.log.clone();
    swapped.swap(3, 4);
    let diff = compare_golden(&swapped, &golden).unwrap();
    assert_eq!(diff.first_divergence.unwrap().seq, Some(swapped[3].seq));
}

#[test]
fn missing_assets_and_bad_scripts_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(script_path("diet")).unwrap()).unwrap();
    doc["events"] = serde_json::json!([{"at_ms": 0, "kind": "frame", "source": {"path": "missing.png"}}]);
    let path = dir.path().join("s.json");
    std::fs::write(&path, doc.to_string()).unwrap();
    let script = Script::load(&path).unwrap();
    assert!(matches!(run_script(&script), Err(ScenarioError::MissingAsset(_))));

    std::fs::write(&path, "{\"version\": 1}").unwrap();
    assert!(matches!(Script::load(&path), Err(ScenarioError::ScriptInvalid(_))));
}
