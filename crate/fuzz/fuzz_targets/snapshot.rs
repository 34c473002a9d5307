#![no_main]

use libfuzzer_sys::fuzz_target;
use layoutpilot_core::fixtures::ota_netlist;
use layoutpilot_core::layout::Layout;

fuzz_target!(|text: &str| {
    if let Ok(l) = Layout::from_snapshot(ota_netlist(), text) {
        let doc = l.snapshot();
        let back = Layout::from_snapshot(ota_netlist(), &doc).expect("own snapshot loads");
        assert_eq!(back.snapshot(), doc);
    }
});
