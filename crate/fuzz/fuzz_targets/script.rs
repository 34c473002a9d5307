#![no_main]

use std::sync::OnceLock;

use libfuzzer_sys::fuzz_target;
use layoutpilot_core::fixtures::ota_layout;
use layoutpilot_core::layout::Layout;
use layoutpilot_core::script::{parse_script, serialize_script};
use layoutpilot_core::validate::validate_text;

fn ctx() -> &'static Layout {
    static CTX: OnceLock<Layout> = OnceLock::new();
    CTX.get_or_init(ota_layout)
}

fuzz_target!(|text: &str| {
    if let Ok(s) = parse_script(text) {
        let again = parse_script(&serialize_script(&s)).expect("serialized script parses");
        assert_eq!(again.commands, s.commands);
    }
    let _ = validate_text(text, ctx());
});
