#![no_main]

use libfuzzer_sys::fuzz_target;
use layoutpilot_core::fixtures::ota_netlist;
use layoutpilot_core::layout::{load_layout, parse_placement_text};

fuzz_target!(|text: &str| {
    let _ = parse_placement_text(text);
    let _ = load_layout(ota_netlist(), text);
});
