#![no_main]

use libfuzzer_sys::fuzz_target;
use layoutpilot_core::netlist::parse_netlist;

fuzz_target!(|text: &str| {
    if let Ok(n) = parse_netlist(text) {
        for d in n.devices.values() {
            for net in &d.terminals {
                assert!(n.nets.contains_key(net));
            }
        }
    }
});
