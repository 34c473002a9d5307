//! The six-turn OTA editing session, replayable with a scripted backend.

use crate::model::ScriptedClient;

/// Scripted replies keyed by agent and turn.
pub const FIXTURE: &str = include_str!("../fixtures/case_study.jsonl");

/// Designer messages, one per turn.
pub const TURNS: [&str; 6] = [
    "The OTA is not performing well after layout. What can I do to improve it?",
    "Let's go with the first option, symmetry. Which devices should it apply to?",
    "Also make the capacitor pairs symmetric: C3 with C2 and C4 with C5.",
    "Add a symmetry constraint between R1 and R2.",
    "Now route every net of the circuit.",
    "Raise the routing priority of net0130, VIM, net0132 and VIP to 10 and of net096 and net092 to 8, reroute, then widen the VDD and GND lines.",
];

pub fn client() -> ScriptedClient {
    ScriptedClient::from_jsonl(FIXTURE).expect("bundled case-study fixture parses")
}
