#![no_main]

use libfuzzer_sys::fuzz_target;
use layoutpilot_agents::knowledge::parse_chunk;

fuzz_target!(|text: &str| {
    if let Ok(c) = parse_chunk(text) {
        assert!(!c.id.is_empty());
    }
});
