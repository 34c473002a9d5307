#![no_main]

use libfuzzer_sys::fuzz_target;
use layoutpilot_agents::eval::CorpusSpec;

fuzz_target!(|text: &str| {
    if let Ok(s) = CorpusSpec::parse(text) {
        assert!(s.min_commands >= 1 && s.min_commands <= s.max_commands);
    }
});
