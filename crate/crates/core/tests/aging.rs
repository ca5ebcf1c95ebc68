mod common;

use common::{context, toy_layout, toy_loop};
use tsvpdn::aging::{AgingContext, AgingSettings, WorkloadProfile, SECONDS_PER_YEAR};
use tsvpdn::em::{current_density, void_growth, EmParams};
use tsvpdn::geometry::Design;
use tsvpdn::irdrop::Analyzer;

fn settings(em: EmParams, horizon: f64, record_every: usize) -> AgingSettings {
    AgingSettings { em, horizon, record_every, ..AgingSettings::default() }
}

#[test]
fn radius_follows_closed_form_every_step() {
    let net = toy_loop(0.2, 0.05);
    let layout = toy_layout(1);
    let ctx = AgingContext::new(Analyzer::new(&layout, &net).unwrap(), 75.0).unwrap();
    for (af, r_init) in [(0.5, 0.0), (0.3, 1e-7)] {
        let em = EmParams { initial_radius: r_init, ..EmParams::default() };
        let wl = WorkloadProfile { active_fraction: af, demanded_parallelism: 8, ..WorkloadProfile::default() };
        let steps = 200;
        let tl = ctx.simulate(&wl, &settings(em.clone(), steps as f64 * em.dt, 1)).unwrap();
        assert_eq!(tl.transitions(), 0);
        assert_eq!(tl.events.len(), steps + 1);
        let inc = void_growth(&em, current_density(1, &em), em.dt * af);
        for (k, e) in tl.events.iter().enumerate() {
            assert_eq!(e.void_radius, r_init + k as f64 * inc, "step {k}");
            assert_eq!(e.t, k as f64 * em.dt);
        }
    }
}

#[test]
fn toy_lifetime_scales_inversely_with_activity() {
    let net = toy_loop(0.2, 0.05);
    let layout = toy_layout(1);
    let ctx = AgingContext::new(Analyzer::new(&layout, &net).unwrap(), 75.0).unwrap();
    let s = settings(EmParams::default(), 400.0 * SECONDS_PER_YEAR, 10);
    let life = |af: f64| {
        let wl = WorkloadProfile { active_fraction: af, ..WorkloadProfile::default() };
        ctx.simulate(&wl, &s).unwrap().lifetime.unwrap()
    };
    let (l1, l2, l4) = (life(1.0), life(0.5), life(0.25));
    assert!(l1 < l2 && l2 < l4);
    assert!((l2 / l1 - 2.0).abs() < 1e-9 && (l4 / l1 - 4.0).abs() < 1e-9);
}

#[test]
fn idle_workload_never_ages() {
    let ctx = context(Design::Clustered);
    let wl = WorkloadProfile { active_fraction: 0.0, ..WorkloadProfile::default() };
    let tl = ctx.simulate(&wl, &AgingSettings::default()).unwrap();
    assert_eq!(tl.events.len(), 1);
    assert_eq!(tl.events[0].napsaa, 4);
    assert_eq!(tl.lifetime, None);
}

#[test]
fn crossings_stable_under_dt_halving() {
    let ctx = context(Design::Distributed);
    let wl = WorkloadProfile::default();
    let em = EmParams::default();
    let half = EmParams { dt: em.dt / 2.0, ..em.clone() };
    let crossings = |em: &EmParams| {
        let tl = ctx.simulate(&wl, &settings(em.clone(), 60.0 * SECONDS_PER_YEAR, 10)).unwrap();
        tl.events.windows(2).filter(|w| w[1].napsaa != w[0].napsaa).map(|w| (w[1].napsaa, w[1].t)).collect::<Vec<_>>()
    };
    let (a, b) = (crossings(&em), crossings(&half));
    assert_eq!(a.len(), b.len());
    assert!(!a.is_empty());
    for ((na, ta), (nb, tb)) in a.iter().zip(&b) {
        assert_eq!(na, nb);
        assert!((ta - tb).abs() <= half.dt, "{ta} vs {tb}");
    }
}

#[test]
fn timeline_is_monotone_and_within_margin() {
    let ctx = context(Design::Distributed);
    let wl = WorkloadProfile { active_fraction: 0.8, demanded_parallelism: 16, ..WorkloadProfile::default() };
    let tl = ctx.simulate(&wl, &AgingSettings::default()).unwrap();
    assert_eq!(tl.events[0].napsaa, 32);
    for w in tl.events.windows(2) {
        assert!(w[1].t >= w[0].t);
        assert!(w[1].napsaa <= w[0].napsaa);
        assert!(w[1].tsv_resistance >= w[0].tsv_resistance);
        assert!(w[1].void_radius >= w[0].void_radius);
    }
    for e in tl.events.iter().filter(|e| e.napsaa > 0) {
        assert!(e.max_droop <= 75.0 + 1e-6, "{e:?}");
    }
    let lt = tl.lifetime.expect("fails within the horizon");
    assert_eq!(tl.events.last().unwrap().napsaa, 0);
    assert_eq!(tl.events.last().unwrap().t, lt);
}
