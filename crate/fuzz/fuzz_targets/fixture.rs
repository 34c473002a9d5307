#![no_main]

use libfuzzer_sys::fuzz_target;
use layoutpilot_agents::model::parse_fixture;

fuzz_target!(|text: &str| {
    let _ = parse_fixture(text);
});
