#![no_main]

use libfuzzer_sys::fuzz_target;
use layoutpilot_core::validate::check_envelope;

fuzz_target!(|text: &str| {
    if let Ok(env) = check_envelope(text) {
        if !env.prose.contains("```") {
            assert_eq!(check_envelope(&env.render()).as_ref(), Ok(&env));
        }
    }
});
