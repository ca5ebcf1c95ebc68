//! Lifetime simulation: EM void growth drives TSV resistance up and NAPSAA
//! steps down through the headroom schedule until nothing is left.

use std::collections::BTreeMap;

use crate::em::{current_density, void_growth, void_to_resistance, EmParams, VoidResistanceModel, VoidState};
use crate::error::{Error, Result};
use crate::geometry::{Design, PdnLayout};
use crate::irdrop::{Analyzer, LEVELS};
use crate::netlist::{LoadSet, ResistorNetwork};

pub const SECONDS_PER_YEAR: f64 = 3.1536e7;
pub const DEFAULT_HORIZON_YEARS: f64 = 60.0;
pub const DEFAULT_RECORD_EVERY: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadProfile {
    pub name: String,
    pub active_fraction: f64,
    pub demanded_parallelism: usize,
    /// s
    pub run_active_time: f64,
    /// accesses/s
    pub request_rate: f64,
    /// J/access
    pub read_write_energy: f64,
    /// W
    pub static_power: f64,
    /// J per activation
    pub activation_energy: f64,
}

impl Default for WorkloadProfile {
    fn default() -> Self {
        WorkloadProfile {
            name: "default".into(),
            active_fraction: 0.5,
            demanded_parallelism: 32,
            run_active_time: 3600.0,
            request_rate: 5.0e7,
            read_write_energy: 2.0e-9,
            static_power: 0.05,
            activation_energy: 1.0e-9,
        }
    }
}

impl WorkloadProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.active_fraction >= 0.0 && self.active_fraction <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "workload {}: active_fraction {} outside [0, 1]",
                self.name, self.active_fraction
            )));
        }
        if !(1..=32).contains(&self.demanded_parallelism) {
            return Err(Error::InvalidParams(format!(
                "workload {}: demanded_parallelism {} outside 1..=32",
                self.name, self.demanded_parallelism
            )));
        }
        let non_negative = [
            ("run_active_time", self.run_active_time),
            ("request_rate", self.request_rate),
            ("read_write_energy", self.read_write_energy),
            ("static_power", self.static_power),
            ("activation_energy", self.activation_energy),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!("workload {}: {name} must be non-negative", self.name)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgingEvent {
    /// s
    pub t: f64,
    pub napsaa: usize,
    /// mV
    pub max_droop: f64,
    /// Ω per TSV chain
    pub tsv_resistance: f64,
    /// m
    pub void_radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgingTimeline {
    pub design: Option<Design>,
    pub workload: String,
    pub events: Vec<AgingEvent>,
    /// s; `None` when the horizon came first.
    pub lifetime: Option<f64>,
    pub horizon: f64,
}

impl AgingTimeline {
    pub fn transitions(&self) -> usize {
        self.events.windows(2).filter(|w| w[1].napsaa != w[0].napsaa).count()
    }

    pub fn napsaa_at(&self, t: f64) -> usize {
        self.events.iter().take_while(|e| e.t <= t).last().map_or(0, |e| e.napsaa)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_s,t_years,napsaa,max_droop_mv,tsv_resistance_ohm,void_radius_m\n");
        for e in &self.events {
            out.push_str(&format!(
                "{:.5e},{:.5e},{},{:.5e},{:.5e},{:.5e}\n",
                e.t,
                e.t / SECONDS_PER_YEAR,
                e.napsaa,
                e.max_droop,
                e.tsv_resistance,
                e.void_radius
            ));
        }
        out
    }

    pub fn summary(&self) -> String {
        let years = lifetime_years(self).map_or_else(
            || format!("none (horizon {:.2} reached)", self.horizon / SECONDS_PER_YEAR),
            |y| format!("{y:.2}"),
        );
        format!(
            "design = {}\nworkload = {}\nlifetime_years = {years}\ntransitions = {}\n",
            self.design.map_or("custom", Design::name),
            self.workload,
            self.transitions()
        )
    }
}

pub fn lifetime_years(t: &AgingTimeline) -> Option<f64> {
    t.lifetime.map(|s| s / SECONDS_PER_YEAR)
}

pub fn runs_until_failure(wl: &WorkloadProfile, time_to_max_resistance: f64) -> Result<u64> {
    if !(wl.run_active_time > 0.0) {
        return Err(Error::ZeroActiveTime);
    }
    Ok((time_to_max_resistance / wl.run_active_time).floor().max(0.0) as u64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgingSettings {
    pub em: EmParams,
    pub model: VoidResistanceModel,
    /// s
    pub horizon: f64,
    /// Record a periodic event every this many steps.
    pub record_every: usize,
}

impl Default for AgingSettings {
    fn default() -> Self {
        AgingSettings {
            em: EmParams::default(),
            model: VoidResistanceModel::default(),
            horizon: DEFAULT_HORIZON_YEARS * SECONDS_PER_YEAR,
            record_every: DEFAULT_RECORD_EVERY,
        }
    }
}

/// Level to headroom for the levels achievable at age 0; bisection per level.
pub fn schedule_with(analyzer: &Analyzer<'_>, margin_mv: f64, levels: &[usize]) -> Result<BTreeMap<usize, f64>> {
    let mut out = BTreeMap::new();
    for &n in levels {
        if n == 0 || n > analyzer.layout().subarray_count() {
            continue;
        }
        match analyzer.headroom(n, margin_mv, analyzer.default_policy()) {
            Ok(h) => {
                out.insert(n, h);
            }
            Err(Error::UnachievableLevel { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

pub fn headroom_schedule(
    layout: &PdnLayout,
    network: &ResistorNetwork,
    margin_mv: f64,
    levels: &[usize],
) -> Result<BTreeMap<usize, f64>> {
    schedule_with(&Analyzer::new(layout, network)?, margin_mv, levels)
}

/// Precomputed per-design state shared by every workload simulation.
pub struct AgingContext<'a> {
    analyzer: Analyzer<'a>,
    margin_mv: f64,
    /// Largest level first.
    levels: Vec<(usize, f64)>,
    placements: BTreeMap<usize, LoadSet>,
}

impl<'a> AgingContext<'a> {
    pub fn new(analyzer: Analyzer<'a>, margin_mv: f64) -> Result<Self> {
        let schedule = schedule_with(&analyzer, margin_mv, &LEVELS)?;
        let mut placements = BTreeMap::new();
        for &n in schedule.keys() {
            placements.insert(n, analyzer.place(n, analyzer.default_policy(), 0.0)?);
        }
        Ok(AgingContext { analyzer, margin_mv, levels: schedule.into_iter().rev().collect(), placements })
    }

    pub fn analyzer(&self) -> &Analyzer<'a> {
        &self.analyzer
    }

    pub fn margin_mv(&self) -> f64 {
        self.margin_mv
    }

    pub fn schedule(&self) -> BTreeMap<usize, f64> {
        self.levels.iter().copied().collect()
    }

    pub fn initial_napsaa(&self) -> usize {
        self.levels.first().map_or(0, |l| l.0)
    }

    pub fn placement(&self, level: usize) -> Option<&LoadSet> {
        self.placements.get(&level)
    }

    /// Worst droop of the level's placement (or the smallest level's once at 0) at a chain resistance.
    pub fn droop_at(&self, level: usize, resistance: f64) -> Result<f64> {
        let r0 = self.analyzer.network().nominal_tsv_resistance();
        if !resistance.is_finite() {
            return Ok(f64::INFINITY);
        }
        let key = if level == 0 { self.levels.last().map(|l| l.0) } else { Some(level) };
        match key.and_then(|k| self.placements.get(&k)) {
            Some(loads) => self.analyzer.max_droop_mv(loads, (resistance - r0).max(0.0)),
            None => Ok(f64::INFINITY),
        }
    }

    pub fn simulate(&self, wl: &WorkloadProfile, settings: &AgingSettings) -> Result<AgingTimeline> {
        wl.validate()?;
        settings.em.validate()?;
        if self.levels.is_empty() {
            return Err(Error::NoInitialLevel);
        }
        if !(settings.horizon >= 0.0) {
            return Err(Error::InvalidParams("horizon must be non-negative".into()));
        }
        let em = &settings.em;
        let r0 = self.analyzer.network().nominal_tsv_resistance();
        let excess = |r: f64| void_to_resistance(&VoidState { radius: r, elapsed: 0.0 }, &settings.model, r0, em) - r0;
        let level = |li: usize| self.levels.get(li).map_or(0, |l| l.0);
        let limit = |li: usize| self.levels[li].1;
        let rate = |li: usize| {
            let used = level(li).min(wl.demanded_parallelism);
            void_growth(em, current_density(used, em), em.dt * wl.active_fraction)
        };
        let mut timeline = AgingTimeline {
            design: self.analyzer.network().design,
            workload: wl.name.clone(),
            events: Vec::new(),
            lifetime: None,
            horizon: settings.horizon,
        };
        let record = |tl: &mut AgingTimeline, t: f64, li: usize, r: f64| -> Result<()> {
            let resistance = excess(r) + r0;
            let max_droop = self.droop_at(level(li), resistance)?;
            tl.events.push(AgingEvent { t, napsaa: level(li), max_droop, tsv_resistance: resistance, void_radius: r });
            Ok(())
        };

        let mut li = 0;
        let mut r = em.initial_radius;
        while li < self.levels.len() && excess(r) > limit(li) {
            li += 1;
        }
        record(&mut timeline, 0.0, li, r)?;
        if li == self.levels.len() {
            timeline.lifetime = Some(0.0);
            return Ok(timeline);
        }
        if wl.active_fraction == 0.0 || settings.horizon == 0.0 {
            return Ok(timeline);
        }

        let every = settings.record_every.max(1);
        let steps = (settings.horizon / em.dt).ceil() as usize;
        let (mut anchor_r, mut anchor_k, mut inc) = (r, 0usize, rate(li));
        for k in 0..steps {
            let t_k = k as f64 * em.dt;
            let last = k + 1 == steps;
            let t_next = if last { settings.horizon } else { (k + 1) as f64 * em.dt };
            let phase = if last { (t_next - t_k) / em.dt } else { 1.0 };
            let r_end = (anchor_r + ((k - anchor_k) as f64 + phase) * inc).min(em.tsv_radius);
            if excess(r_end) > limit(li) {
                let (mut t_s, mut r_s, mut rem) = (t_k, r, phase);
                loop {
                    let inc_now = rate(li);
                    let r_e = (r_s + rem * inc_now).min(em.tsv_radius);
                    if li < self.levels.len() && excess(r_e) > limit(li) {
                        let r_cross = crossing_radius(&excess, limit(li), r_s, r_e);
                        let f = ((r_cross - r_s) / inc_now).clamp(0.0, rem);
                        t_s += f * em.dt;
                        rem -= f;
                        r_s = r_cross;
                        li += 1;
                        record(&mut timeline, t_s, li, r_s)?;
                        if li == self.levels.len() {
                            timeline.lifetime = Some(t_s);
                            return Ok(timeline);
                        }
                    } else {
                        r = r_e;
                        break;
                    }
                }
                anchor_r = r;
                anchor_k = k + 1;
                inc = rate(li);
            } else {
                r = r_end;
            }
            if (k + 1) % every == 0 || last {
                record(&mut timeline, t_next, li, r)?;
            }
        }
        Ok(timeline)
    }
}

/// Radius in `[lo, hi]` where the excess resistance reaches `limit`.
fn crossing_radius(excess: &dyn Fn(f64) -> f64, limit: f64, lo: f64, hi: f64) -> f64 {
    if excess(lo) > limit {
        return lo;
    }
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if excess(mid) > limit {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo
}

pub fn simulate_aging(
    layout: &PdnLayout,
    network: &ResistorNetwork,
    em: &EmParams,
    wl: &WorkloadProfile,
    margin_mv: f64,
    horizon: f64,
) -> Result<AgingTimeline> {
    let ctx = AgingContext::new(Analyzer::new(layout, network)?, margin_mv)?;
    let settings = AgingSettings { em: em.clone(), horizon, ..AgingSettings::default() };
    ctx.simulate(wl, &settings)
}
