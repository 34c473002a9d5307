mod common;

use std::collections::BTreeMap;

use layoutpilot_core::netlist::{parse_netlist, DeviceKind};
use rand::seq::SliceRandom;

/// Cards read straight from the text: (name, nets, kind, params).
fn cards(text: &str) -> Vec<(String, Vec<String>, String, Vec<String>)> {
    text.lines()
        .filter(|l| !l.starts_with('.') && !l.trim().is_empty())
        .map(|l| {
            let t: Vec<&str> = l.split_whitespace().collect();
            let k = t.iter().position(|x| x.contains('=')).unwrap() - 1;
            let mut params: Vec<String> = t[k + 1..].iter().map(|s| s.to_string()).collect();
            params.sort();
            (t[0].to_string(), t[1..k].iter().map(|s| s.to_string()).collect(), t[k].to_string(), params)
        })
        .collect()
}

#[test]
fn diff_pairs_equal_pairwise_scan() {
    for seed in 0..40 {
        let text = common::random_ckt(&mut common::rng(seed), 10, 4);
        let n = parse_netlist(&text).unwrap();
        let c = cards(&text);
        let mut expect = vec![];
        for a in &c {
            for b in &c {
                let mos = a.2.ends_with("mos");
                if a.0 < b.0 && mos && a.2 == b.2 && a.3 == b.3 && a.1[2] == b.1[2] {
                    expect.push((a.0.clone(), b.0.clone()));
                }
            }
        }
        expect.sort();
        let got: Vec<(String, String)> = n.find_differential_pairs().into_iter().map(|p| (p.a, p.b)).collect();
        assert_eq!(got, expect, "seed {seed}");
    }
}

#[test]
fn diff_pairs_ignore_declaration_order() {
    for seed in 0..20 {
        let mut r = common::rng(seed);
        let text = common::random_ckt(&mut r, 10, 4);
        let mut lines: Vec<&str> = text.lines().skip(1).collect();
        lines.shuffle(&mut r);
        let a = parse_netlist(&text).unwrap();
        let b = parse_netlist(&lines.join("\n")).unwrap();
        assert_eq!(a.find_differential_pairs(), b.find_differential_pairs());
    }
}

#[test]
fn matched_groups_equal_exhaustive_grouping() {
    for seed in 0..40 {
        let text = common::random_ckt(&mut common::rng(100 + seed), 12, 4);
        let n = parse_netlist(&text).unwrap();
        for kind in [DeviceKind::Capacitor, DeviceKind::Resistor, DeviceKind::Nmos] {
            let c: Vec<_> = cards(&text).into_iter().filter(|c| c.2 == kind.as_str()).collect();
            let mut groups: Vec<Vec<String>> = vec![];
            for a in &c {
                let g: Vec<String> = c.iter().filter(|b| b.3 == a.3).map(|b| b.0.clone()).collect();
                if g.len() >= 2 && !groups.contains(&g) {
                    groups.push(g);
                }
            }
            for g in &mut groups {
                g.sort();
            }
            groups.sort();
            assert_eq!(n.find_matched_groups(kind), groups, "seed {seed} {kind}");
        }
    }
}

#[test]
fn net_terminals_cover_every_terminal_once() {
    for seed in 0..20 {
        let n = common::random_netlist(&mut common::rng(seed), 12, 5);
        let mut seen: BTreeMap<(String, usize), usize> = BTreeMap::new();
        for net in n.nets.keys() {
            for t in n.net_terminals(net).unwrap() {
                *seen.entry(t).or_default() += 1;
            }
        }
        let total: usize = n.devices.values().map(|d| d.terminals.len()).sum();
        assert_eq!(seen.len(), total);
        assert!(seen.values().all(|&k| k == 1));
    }
}
