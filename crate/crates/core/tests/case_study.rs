use layoutpilot_core::fixtures::ota_layout;
use layoutpilot_core::routing::{is_connected, route_all};
use layoutpilot_core::script::{execute, parse_script};
use layoutpilot_core::validate::validate_script;

const STEPS: [&str; 4] = [
    "symAdd M34 M35\nsymAdd M71 M70\nsymAdd M1 M1\n",
    "symAdd C3 C2\nsymAdd C4 C5\n",
    "symAdd R1 R2\n",
    "netPriority net0130 10\nnetPriority VIM 10\nnetPriority net0132 10\nnetPriority VIP 10\nnetPriority net096 8\nnetPriority net092 8\n",
];

#[test]
fn case_study_steps_validate_and_execute() {
    let mut l = ota_layout();
    for text in &STEPS[..3] {
        let s = parse_script(text).unwrap();
        let report = validate_script(&s, &l);
        assert!(report.is_clean(), "{report:?}");
        execute(&mut l, &s).unwrap();
        assert!(l.overlaps().is_empty());
        assert!(l.sym_violations().is_empty());
    }
    let t = std::time::Instant::now();
    let r = route_all(&mut l);
    eprintln!("route_all {:?} failed={:?}", t.elapsed(), r.failed);
    assert!(r.failed.is_empty());
    for net in &r.routed {
        assert!(is_connected(&l, net), "{net}");
    }
    let s = parse_script(STEPS[3]).unwrap();
    assert!(validate_script(&s, &l).is_clean());
    execute(&mut l, &s).unwrap();
    let r = route_all(&mut l);
    assert!(r.failed.is_empty(), "{:?}", r.failed);
    assert_eq!(&r.order[..4], ["VIM", "VIP", "net0130", "net0132"]);
    let widen = parse_script("wireWidth VDD wire1 2\nwireWidth GND wire1 2\n").unwrap();
    assert!(validate_script(&widen, &l).is_clean());
    execute(&mut l, &widen).unwrap();
    for net in ["VDD", "GND"] {
        assert!(is_connected(&l, net), "{net}");
    }
}
