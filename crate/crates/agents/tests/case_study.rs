use std::sync::Arc;
use std::time::{Duration, Instant};

use layoutpilot_agents::case_study::{client, TURNS};
use layoutpilot_agents::pipeline::{run_pipeline, Session, Stage, TurnOutcome};
use layoutpilot_agents::{AgentId, Agents, RequestKind};
use layoutpilot_core::fixtures::ota_layout;
use layoutpilot_core::routing::is_connected;
use layoutpilot_core::validate::validate_text;

fn replay() -> (Session, Vec<TurnOutcome>) {
    let agents = Agents::new(Some(Arc::new(client())));
    let mut s = Session::new(ota_layout());
    let outs = TURNS
        .iter()
        .map(|t| run_pipeline(&mut s, &agents, t).expect("turn runs"))
        .collect();
    (s, outs)
}

fn lines(script: &Option<String>) -> Vec<&str> {
    script.as_deref().unwrap_or_default().lines().collect()
}

#[test]
fn six_turns_produce_the_recorded_edits() {
    let (s, outs) = replay();
    let first = &outs[0];
    assert_eq!(first.kind, Some(RequestKind::Abstract));
    assert!(first.awaiting_selection);
    assert_eq!(first.solutions.as_ref().map(Vec::len), Some(5));
    assert!(first.snapshot.is_none());

    let second = &outs[1];
    assert_eq!(lines(&second.script), ["symAdd M34 M35", "symAdd M71 M70", "symAdd M1 M1"]);
    let hops: Vec<(AgentId, AgentId)> = second.transcript.iter().map(|e| (e.sender, e.recipient)).collect();
    assert!(hops.contains(&(AgentId::Refiner, AgentId::Adapter)));
    assert!(hops.contains(&(AgentId::Adapter, AgentId::Generator)));
    assert_eq!(second.stage, Stage::Idle);

    assert_eq!(lines(&outs[2].script), ["symAdd C3 C2", "symAdd C4 C5"]);
    assert_eq!(lines(&outs[3].script), ["symAdd R1 R2"]);
    assert!(lines(&outs[4].script).iter().all(|l| l.starts_with("netReroute ")));
    assert_eq!(
        lines(&outs[5].script)[..6],
        [
            "netPriority net0130 10",
            "netPriority VIM 10",
            "netPriority net0132 10",
            "netPriority VIP 10",
            "netPriority net096 8",
            "netPriority net092 8",
        ]
    );

    for o in &outs[1..] {
        assert!(o.executed, "turn {} did not execute", o.turn);
        let r = o.report.as_ref().unwrap();
        assert!(r.formatting.pass && r.is_clean(), "turn {}: {r:?}", o.turn);
    }
    let labels: Vec<&str> = s.snapshots.iter().map(|r| r.label.as_str()).collect();
    assert_eq!(labels, ["S1", "S2", "S3", "S4", "S5", "S6"]);

    let l = &s.layout;
    assert!(l.overlaps().is_empty());
    assert!(l.sym_violations().is_empty());
    assert_eq!(l.sym_pairs.len(), 6);
    assert!(l.nets.values().all(|r| !r.stale));
    for net in ["VDD", "GND", "VIM", "VIP"] {
        assert!(is_connected(l, net), "{net}");
    }
    assert!(l.nets["VDD"].wires.iter().any(|w| w.width == 2));
}

#[test]
fn every_recorded_script_validates_against_its_parent() {
    let (s, _) = replay();
    for (i, applied) in s.scripts.iter().enumerate() {
        // scripts[i] turned S{i+1} into S{i+2}.
        let parent = layoutpilot_core::layout::Layout::from_snapshot(s.netlist.clone(), &s.documents[i]).unwrap();
        assert!(validate_text(&applied.text, &parent).is_clean(), "{}", applied.label);
    }
}

#[test]
fn replay_is_deterministic_and_fast() {
    let mut hashes = Vec::new();
    for _ in 0..3 {
        let t = Instant::now();
        let (s, _) = replay();
        assert!(t.elapsed() < Duration::from_secs(5), "replay took {:?}", t.elapsed());
        hashes.push(s.snapshots.clone());
    }
    assert_eq!(hashes[0], hashes[1]);
    assert_eq!(hashes[1], hashes[2]);
}
