#![no_main]

use libfuzzer_sys::fuzz_target;
use layoutpilot_agents::message::route_message;
use layoutpilot_agents::AgentId;

fuzz_target!(|text: &str| {
    for sender in [AgentId::Refiner, AgentId::Adapter, AgentId::Analyzer] {
        let _ = route_message(sender, text);
    }
});
