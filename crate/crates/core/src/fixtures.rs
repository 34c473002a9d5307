//! Bundled OTA netlist and initial placement.

use std::sync::Arc;

use crate::layout::{load_layout, Layout};
use crate::netlist::{parse_netlist, Netlist};

pub const OTA_NETLIST: &str = include_str!("../fixtures/ota.ckt");
pub const OTA_PLACEMENT: &str = include_str!("../fixtures/ota.place");

pub fn ota_netlist() -> Arc<Netlist> {
    Arc::new(parse_netlist(OTA_NETLIST).expect("bundled OTA netlist parses"))
}

/// The OTA at its unconstrained starting point.
pub fn ota_layout() -> Layout {
    load_layout(ota_netlist(), OTA_PLACEMENT).expect("bundled OTA placement loads")
}
