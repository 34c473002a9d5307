#![no_main]

use libfuzzer_sys::fuzz_target;
use layoutpilot_agents::steps::parse_solutions;

fuzz_target!(|text: &str| {
    if let Ok(s) = parse_solutions(text) {
        assert!(!s.is_empty());
    }
});
