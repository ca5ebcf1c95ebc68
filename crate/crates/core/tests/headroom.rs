mod common;

use common::{toy_layout, toy_loop};
use tsvpdn::irdrop::{Analyzer, PlacementPolicy, HEADROOM_TOL};
use tsvpdn::netlist::{apply_tsv_resistance, LoadSet};
use tsvpdn::Error;

#[test]
fn half_ohm_loop_has_eighth_ohm_headroom() {
    // 0.1 A × (0.5 + 2ΔR) ≤ 75 mV  ⇒  ΔR ≤ 0.125 Ω
    let net = toy_loop(0.2, 0.05);
    let layout = toy_layout(1);
    let a = Analyzer::new(&layout, &net).unwrap();
    let h = a.headroom_for(&LoadSet::new().with(1, 0.1), 75.0).unwrap();
    assert!(h <= 0.125 && 0.125 - h <= HEADROOM_TOL, "{h}");
    assert_eq!(a.napsaa(75.0, PlacementPolicy::AdversarialGreedy, 0.0).unwrap(), 1);
}

#[test]
fn two_ohm_loop_is_unachievable() {
    let net = toy_loop(0.9, 0.1);
    let layout = toy_layout(1);
    let a = Analyzer::new(&layout, &net).unwrap();
    match a.headroom_for(&LoadSet::new().with(1, 0.1), 75.0) {
        Err(Error::UnachievableLevel { level: 1, droop_mv, .. }) => assert!((droop_mv - 200.0).abs() < 1e-9),
        other => panic!("{other:?}"),
    }
    assert_eq!(a.napsaa(75.0, PlacementPolicy::AdversarialGreedy, 0.0).unwrap(), 0);
}

#[test]
fn headroom_is_where_droop_meets_margin() {
    let net = toy_loop(0.2, 0.05);
    let layout = toy_layout(1);
    let a = Analyzer::new(&layout, &net).unwrap();
    let loads = LoadSet::new().with(1, 0.1);
    let h = a.headroom_for(&loads, 60.0).unwrap();
    assert!(a.max_droop_mv(&loads, h).unwrap() <= 60.0);
    assert!(a.max_droop_mv(&loads, h + 2.0 * HEADROOM_TOL).unwrap() > 60.0);
    let aged = apply_tsv_resistance(&net, h).unwrap();
    let b = Analyzer::new(&layout, &aged).unwrap();
    assert!((b.max_droop_mv(&loads, 0.0).unwrap() - a.max_droop_mv(&loads, h).unwrap()).abs() < 1e-9);
}
