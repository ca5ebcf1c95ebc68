mod common;

use common::{analyzer, canonical};
use tsvpdn::geometry::{Design, Polarity};
use tsvpdn::irdrop::{find_napsaa, IrDropMap, PlacementPolicy};
use tsvpdn::netlist::{apply_tsv_resistance, LoadSet};
use tsvpdn::solver::{effective_resistance, worst_effective_resistance, Factorization};

#[test]
fn worst_resistance_bands() {
    let (_, rc) = worst_effective_resistance(&canonical(Design::Clustered).network).unwrap();
    let (_, rd) = worst_effective_resistance(&canonical(Design::Distributed).network).unwrap();
    assert!((0.09..=0.15).contains(&rc), "{rc}");
    assert!((0.0225..=0.0375).contains(&rd), "{rd}");
}

#[test]
fn napsaa_and_droop_bands() {
    let c = analyzer(Design::Clustered);
    let d = analyzer(Design::Distributed);
    let droop = |a: &tsvpdn::irdrop::Analyzer<'_>, n| a.max_droop_mv(&a.place(n, a.default_policy(), 0.0).unwrap(), 0.0).unwrap();
    assert_eq!(c.napsaa(75.0, c.default_policy(), 0.0).unwrap(), 4);
    assert_eq!(d.napsaa(75.0, d.default_policy(), 0.0).unwrap(), 32);
    assert!((33.0..=61.0).contains(&droop(c, 4)));
    assert!(droop(c, 8) > 75.0);
    assert!((14.0..=27.0).contains(&droop(d, 16)));
    assert!((45.0..=75.0).contains(&droop(d, 32)));
}

#[test]
fn uniform_distributed_placement_spreads_over_sections() {
    let d = analyzer(Design::Distributed);
    let layout = &canonical(Design::Distributed).layout;
    for n in [8, 16, 32] {
        let loads = d.place(n, PlacementPolicy::UniformPerSection, 0.0).unwrap();
        for s in &layout.sections {
            let k = s.subarrays.iter().filter(|id| loads.entries.contains_key(id)).count();
            assert_eq!(k, n / layout.sections.len());
        }
    }
}

#[test]
fn sweep_agrees_with_direct_solve() {
    for design in Design::ALL {
        let a = analyzer(design);
        let net = &canonical(design).network;
        let loads = a.place(4, a.default_policy(), 0.0).unwrap();
        for extra in [0.0, 0.7] {
            let fast = a.map(&loads, extra).unwrap();
            let aged = apply_tsv_resistance(net, extra).unwrap();
            let d = Factorization::new(&aged).unwrap().droops(std::slice::from_ref(&loads)).unwrap().remove(0);
            let slow = d.top_map(&aged).unwrap();
            for (f, s) in fast.grid.iter().zip(slow) {
                assert!((f - s * 1e3).abs() <= 1e-6, "{design} {extra}: {f} vs {}", s * 1e3);
            }
        }
    }
}

#[test]
fn hopeless_tsvs_allow_no_activation() {
    let c = canonical(Design::Distributed);
    let aged = apply_tsv_resistance(&c.network, 1e6).unwrap();
    assert_eq!(find_napsaa(&c.layout, &aged, 75.0, PlacementPolicy::UniformPerSection).unwrap(), 0);
}

#[test]
fn effective_resistance_grows_with_tsv_resistance() {
    let c = canonical(Design::Clustered);
    let (id, r0) = worst_effective_resistance(&c.network).unwrap();
    let aged = apply_tsv_resistance(&c.network, 1.0).unwrap();
    assert!(effective_resistance(&aged, id).unwrap() > r0);
}

#[test]
fn distributed_tsvs_sit_closer_to_middle_sections() {
    let c = &canonical(Design::Clustered).layout;
    let d = &canonical(Design::Distributed).layout;
    for s in &d.sections[1..d.sections.len() - 1] {
        for &id in &s.subarrays {
            let dc = c.nearest_tsv_distance(id, Polarity::P).unwrap();
            let dd = d.nearest_tsv_distance(id, Polarity::P).unwrap();
            assert!(dd < dc, "subarray {id}: {dd} vs {dc}");
        }
    }
}

#[test]
fn map_csv_round_trip() {
    let a = analyzer(Design::Clustered);
    let loads = LoadSet::uniform([3, 17], 0.1);
    let map = a.map(&loads, 0.0).unwrap();
    let text = map.to_csv();
    let back = IrDropMap::from_csv(&text).unwrap();
    assert_eq!((back.nx, back.ny, back.n_saa, back.design), (map.nx, map.ny, 2, Some(Design::Clustered)));
    for (x, y) in back.grid.iter().zip(&map.grid) {
        assert!((x - y).abs() <= 0.005 + 1e-9);
    }
    assert_eq!(back.to_csv(), text);
}
