#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use layoutpilot_core::geom::{Orientation, Point};
use layoutpilot_core::layout::{default_pins, GridSpec, Layout, Placement};
use layoutpilot_core::netlist::{parse_netlist, Netlist};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

/// `.ckt` text for `n` devices over `nets` net names.
pub fn random_ckt(r: &mut ChaCha8Rng, n: usize, nets: usize) -> String {
    let pool: Vec<String> = (0..nets).map(|i| format!("n{i}")).collect();
    let mut out = String::from(".netlist rnd\n");
    for i in 0..n {
        let kind = ["nmos", "pmos", "resistor", "capacitor"][r.gen_range(0..4)];
        let terms = match kind {
            "nmos" | "pmos" => 4,
            "resistor" => 2,
            _ => r.gen_range(2..=3),
        };
        let t: Vec<&str> = (0..terms).map(|_| pool.choose(r).unwrap().as_str()).collect();
        let params = if kind.ends_with("mos") {
            format!("W={} L={}", r.gen_range(1..3), r.gen_range(1..3))
        } else {
            format!("value={}p", r.gen_range(1..3))
        };
        out.push_str(&format!("D{i} {} {kind} {params}\n", t.join(" ")));
    }
    out
}

pub fn random_netlist(r: &mut ChaCha8Rng, n: usize, nets: usize) -> Arc<Netlist> {
    Arc::new(parse_netlist(&random_ckt(r, n, nets)).unwrap())
}

/// Non-overlapping random placement of every device on a `size` grid.
pub fn random_layout(r: &mut ChaCha8Rng, n: usize, size: i64) -> Layout {
    let netlist = random_netlist(r, n, (n / 2).max(2));
    let mut l = Layout::empty(netlist.clone(), GridSpec::new(size, size));
    for d in netlist.devices.values() {
        loop {
            let (w, h) = (r.gen_range(2..5), r.gen_range(2..4));
            let origin = Point::new(r.gen_range(0..size - w), r.gen_range(0..size - h));
            let orientation = *Orientation::ALL.choose(r).unwrap();
            let terminals: Vec<&str> = (0..d.terminals.len()).map(|i| d.terminal_name(i)).collect();
            let p = Placement {
                origin,
                w,
                h,
                orientation,
                pins: default_pins(&terminals, w, h),
            };
            if l.placements.values().all(|q| !q.rect().overlaps(&p.rect())) {
                l.placements.insert(d.name.clone(), p);
                break;
            }
        }
    }
    l
}

/// Pin position computed directly from the orientation definition.
pub fn pin_oracle(p: &Placement, pin: &str) -> Point {
    let o = p.pins[pin];
    let (x, y) = match p.orientation {
        Orientation::R0 => (o.x, o.y),
        Orientation::MX => (o.x, p.h - 1 - o.y),
        Orientation::MY => (p.w - 1 - o.x, o.y),
        Orientation::R180 => (p.w - 1 - o.x, p.h - 1 - o.y),
    };
    Point::new(p.origin.x + x, p.origin.y + y)
}

/// HPWL by a per-net min/max scan over every attachment.
pub fn hpwl_oracle(l: &Layout) -> i64 {
    let mut per_net: BTreeMap<&str, Vec<Point>> = BTreeMap::new();
    for d in l.netlist().devices.values() {
        for (i, net) in d.terminals.iter().enumerate() {
            let p = &l.placements[&d.name];
            per_net.entry(net).or_default().push(pin_oracle(p, d.terminal_name(i)));
        }
    }
    per_net
        .values()
        .map(|pts| {
            let xs = pts.iter().map(|p| p.x);
            let ys = pts.iter().map(|p| p.y);
            (xs.clone().max().unwrap() - xs.min().unwrap()) + (ys.clone().max().unwrap() - ys.min().unwrap())
        })
        .sum()
}
