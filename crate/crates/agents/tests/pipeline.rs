use std::sync::Arc;

use layoutpilot_agents::model::FixtureRecord;
use layoutpilot_agents::pipeline::{restore_turn, run_pipeline, Session, Stage, MAX_REFINE_ROUNDS};
use layoutpilot_agents::{AgentId, Agents, ErrorKind, ScriptedClient};
use layoutpilot_core::fixtures::ota_layout;

fn rec(agent: AgentId, turn: u32, response: &str) -> FixtureRecord {
    FixtureRecord {
        agent,
        turn,
        response: response.to_string(),
    }
}

fn agents(records: Vec<FixtureRecord>) -> Agents {
    Agents::new(Some(Arc::new(ScriptedClient::new(records))))
}

const SOLUTIONS: &str = "1. Symmetry via symAdd\n   Mirror the input pair.\n2. Matching via deviceSwap\n   Interleave the loads.";

fn envelope(commands: &[&str]) -> String {
    format!(
        "Done.\n```json\n{}\n```",
        serde_json::json!({"status": "ok", "commands": commands})
    )
}

#[test]
fn concrete_requests_skip_the_solution_agents() {
    let a = agents(vec![
        rec(AgentId::Classifier, 1, "Concrete"),
        rec(AgentId::Generator, 1, &envelope(&["symAdd M34 M35"])),
    ]);
    let mut s = Session::new(ota_layout());
    let out = run_pipeline(&mut s, &a, "add symmetry between M34 and M35").unwrap();
    assert!(out.executed);
    let called: Vec<AgentId> = s.prompt_log.iter().map(|p| p.prompt.agent).collect();
    assert_eq!(called, [AgentId::Classifier, AgentId::Generator]);
    assert_eq!(s.latest().label, "S2");
}

#[test]
fn refine_loop_stops_after_the_round_limit() {
    let mut records = vec![
        rec(AgentId::Classifier, 1, "Abstract"),
        rec(AgentId::Analyzer, 1, SOLUTIONS),
    ];
    for turn in 1..=MAX_REFINE_ROUNDS + 1 {
        records.push(rec(AgentId::Refiner, turn, "---To Designer---\nWhich option do you prefer?"));
    }
    let a = agents(records);
    let mut s = Session::new(ota_layout());
    run_pipeline(&mut s, &a, "make it better").unwrap();
    for _ in 1..MAX_REFINE_ROUNDS {
        let out = run_pipeline(&mut s, &a, "not sure yet").unwrap();
        assert!(out.awaiting_selection);
    }
    assert!(matches!(s.stage, Stage::AwaitingSelection { rounds, .. } if rounds == MAX_REFINE_ROUNDS));
    let err = run_pipeline(&mut s, &a, "still thinking").unwrap_err();
    assert_eq!(err.kind, ErrorKind::RefineLimit { rounds: MAX_REFINE_ROUNDS });
    assert_eq!(s.stage, Stage::Idle);
    assert_eq!(s.snapshots.len(), 1);
}

#[test]
fn revise_feedback_goes_back_to_the_analyzer() {
    let a = agents(vec![
        rec(AgentId::Classifier, 1, "Abstract"),
        rec(AgentId::Analyzer, 1, SOLUTIONS),
        rec(AgentId::Refiner, 1, "---To Designer---\nPick one."),
        rec(AgentId::Refiner, 2, "---To Analyzer---\nThe designer wants options that avoid moving devices."),
        rec(AgentId::Analyzer, 2, "1. Routing order via netPriority\n   Route the inputs first."),
        rec(AgentId::Refiner, 2, "---To Designer---\nHere is a revised option."),
    ]);
    let mut s = Session::new(ota_layout());
    run_pipeline(&mut s, &a, "improve the OTA").unwrap();
    let out = run_pipeline(&mut s, &a, "nothing that moves devices please").unwrap();
    assert_eq!(out.solutions.unwrap().len(), 1);
    assert!(matches!(s.stage, Stage::AwaitingSelection { rounds: 2, .. }));
}

#[test]
fn without_a_backend_the_session_is_untouched() {
    let a = Agents::new(None);
    let mut s = Session::new(ota_layout());
    let err = run_pipeline(&mut s, &a, "swap M12 and M13").unwrap_err();
    assert!(err.is_model_unavailable());
    assert_eq!(err.agent, Some(AgentId::Generator));
    assert_eq!(s.turns, 0);
    assert!(s.transcript.is_empty());
}

#[test]
fn invalid_scripts_and_refusals_do_not_execute() {
    let a = agents(vec![
        rec(AgentId::Classifier, 1, "Concrete"),
        rec(AgentId::Generator, 1, &envelope(&["symAdd M34 M99"])),
        rec(AgentId::Classifier, 2, "Concrete"),
        rec(
            AgentId::Generator,
            2,
            "No such device.\n```json\n{\"status\": \"invalid_request\", \"notes\": \"M99 is unknown\"}\n```",
        ),
    ]);
    let mut s = Session::new(ota_layout());
    let first = run_pipeline(&mut s, &a, "pair M34 with M99").unwrap();
    assert!(!first.executed);
    assert!(!first.report.unwrap().is_clean());
    let second = run_pipeline(&mut s, &a, "pair M34 with M99").unwrap();
    assert!(!second.executed && second.script.is_none());
    assert_eq!(s.snapshots.len(), 1);
    assert_eq!(s.turns, 2);
}

#[test]
fn restored_turns_rebuild_the_same_session() {
    let a = Agents::new(Some(Arc::new(layoutpilot_agents::case_study::client())));
    let mut live = Session::new(ota_layout());
    let outs: Vec<_> = layoutpilot_agents::case_study::TURNS
        .iter()
        .map(|t| run_pipeline(&mut live, &a, t).unwrap())
        .collect();
    let mut restored = Session::new(ota_layout());
    for o in &outs {
        restore_turn(&mut restored, o).unwrap();
    }
    assert_eq!(restored.snapshots, live.snapshots);
    assert_eq!(restored.stage, live.stage);
    assert_eq!(restored.transcript, live.transcript);
}
