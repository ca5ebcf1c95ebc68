//! IR-drop maps, worst-case activation placement, NAPSAA and resistance headroom.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::geometry::{Design, PdnLayout, Polarity};
use crate::netlist::{LoadSet, ResistorNetwork};
use crate::solver::{Droop, Factorization, TsvSweep};

/// Power-of-two levels of the NAPSAA sweep, largest first.
pub const LEVELS: [usize; 6] = [32, 16, 8, 4, 2, 1];
pub const HEADROOM_MAX: f64 = 100.0;
pub const HEADROOM_TOL: f64 = 1e-4;
/// Droop differences below this (volts) count as ties in greedy placement.
const TIE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct IrDropMap {
    pub design: Option<Design>,
    pub n_saa: usize,
    pub placement: LoadSet,
    pub nx: usize,
    pub ny: usize,
    /// mV, row-major with row 0 at the bank's bottom edge.
    pub grid: Vec<f64>,
    pub max_droop: f64,
    pub argmax: (usize, usize),
}

impl IrDropMap {
    fn from_grid(design: Option<Design>, placement: LoadSet, nx: usize, ny: usize, grid: Vec<f64>) -> Self {
        let mut best = 0;
        for (k, &v) in grid.iter().enumerate() {
            if v > grid[best] {
                best = k;
            }
        }
        IrDropMap {
            design,
            n_saa: placement.len(),
            placement,
            nx,
            ny,
            max_droop: grid.get(best).copied().unwrap_or(0.0),
            argmax: (best % nx.max(1), best / nx.max(1)),
            grid,
        }
    }

    fn from_droop(network: &ResistorNetwork, loads: &LoadSet, droop: &Droop) -> Result<Self> {
        let g = network
            .top_grid
            .as_ref()
            .ok_or_else(|| Error::InvalidParams("network has no top-tier rail grid".into()))?;
        let grid = droop.top_map(network).expect("grid present").into_iter().map(|v| v * 1e3).collect();
        Ok(IrDropMap::from_grid(network.design, loads.clone(), g.nx, g.ny, grid))
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.grid[j * self.nx + i]
    }

    pub fn to_csv(&self) -> String {
        let design = self.design.map_or("custom", Design::name);
        let mut out = format!("# design={design},n_saa={},max_droop_mv={:.2}\n", self.n_saa, self.max_droop);
        for row in self.grid.chunks(self.nx) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.2}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Reads a map written by [`IrDropMap::to_csv`]; the placement is not recorded in the file.
    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::InvalidParams(format!("IR-drop map: {m}"));
        let mut lines = text.lines();
        let header = lines.next().and_then(|h| h.strip_prefix("# ")).ok_or_else(|| bad("missing header"))?;
        let mut design = None;
        let mut n_saa = 0;
        for field in header.split(',') {
            match field.split_once('=') {
                Some(("design", d)) => design = d.parse().ok(),
                Some(("n_saa", n)) => n_saa = n.parse().map_err(|_| bad("bad n_saa"))?,
                Some(("max_droop_mv", _)) => {}
                _ => return Err(bad("unrecognised header field")),
            }
        }
        let mut grid = Vec::new();
        let mut nx = 0;
        let mut ny = 0;
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let row: Vec<f64> = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad("non-numeric cell"))?;
            if nx == 0 {
                nx = row.len();
            } else if row.len() != nx {
                return Err(bad("ragged rows"));
            }
            grid.extend(row);
            ny += 1;
        }
        let mut map = IrDropMap::from_grid(design, LoadSet::new(), nx, ny, grid);
        map.n_saa = n_saa;
        Ok(map)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PlacementPolicy {
    AdversarialGreedy,
    UniformPerSection,
}

impl PlacementPolicy {
    pub fn default_for(design: Design) -> Self {
        match design {
            Design::Clustered => PlacementPolicy::AdversarialGreedy,
            Design::Distributed => PlacementPolicy::UniformPerSection,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PlacementPolicy::AdversarialGreedy => "adversarial_greedy",
            PlacementPolicy::UniformPerSection => "uniform_per_section",
        }
    }
}

impl fmt::Display for PlacementPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PlacementPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "adversarial_greedy" => Ok(PlacementPolicy::AdversarialGreedy),
            "uniform_per_section" => Ok(PlacementPolicy::UniformPerSection),
            other => Err(format!("unknown placement policy `{other}`")),
        }
    }
}

pub fn compute_irdrop_map(network: &ResistorNetwork, loads: &LoadSet) -> Result<IrDropMap> {
    let droop = Factorization::new(network)?.droops(std::slice::from_ref(loads))?.remove(0);
    IrDropMap::from_droop(network, loads, &droop)
}

/// Vertical distance from a subarray to the P line(s) feeding its section.
fn distance_to_p_line(layout: &PdnLayout, section: usize, id: u32) -> f64 {
    let (_, y) = layout.subarray_center(id).expect("valid id");
    let s = &layout.sections[section];
    let mut lines: Vec<f64> = match layout.design {
        Design::Distributed => vec![s.y_max],
        Design::Clustered => layout
            .tsv_sites
            .iter()
            .filter(|t| t.polarity == Polarity::P && t.y >= s.y_min && t.y <= s.y_max)
            .map(|t| t.y)
            .collect(),
    };
    if lines.is_empty() {
        lines.push(s.y_max);
    }
    lines.iter().map(|&l| (l - y).abs()).fold(f64::INFINITY, f64::min)
}

pub fn uniform_per_section(layout: &PdnLayout, n: usize, current: f64) -> Result<LoadSet> {
    if n == 0 || n > layout.subarray_count() {
        return Err(Error::InvalidCount(n));
    }
    let k = layout.sections.len();
    let mut loads = LoadSet::new();
    let mut overflow = 0;
    for (s, section) in layout.sections.iter().enumerate() {
        let want = n / k + usize::from(s < n % k) + overflow;
        let mut ranked = section.subarrays.clone();
        ranked.sort_by(|&a, &b| {
            distance_to_p_line(layout, s, b)
                .total_cmp(&distance_to_p_line(layout, s, a))
                .then(a.cmp(&b))
        });
        let take = want.min(ranked.len());
        overflow = want - take;
        for &id in &ranked[..take] {
            loads = loads.with(id, current);
        }
    }
    Ok(loads)
}

fn greedy(unit: &[(u32, Vec<f64>)], n: usize, current: f64) -> Result<LoadSet> {
    if n == 0 || n > unit.len() {
        return Err(Error::InvalidCount(n));
    }
    let cells = unit[0].1.len();
    let mut total = vec![0.0; cells];
    let mut chosen = vec![false; unit.len()];
    let mut loads = LoadSet::new();
    for _ in 0..n {
        let mut best: Option<(usize, f64)> = None;
        for (k, (_, map)) in unit.iter().enumerate() {
            if chosen[k] {
                continue;
            }
            let peak = total.iter().zip(map).map(|(t, m)| t + current * m).fold(f64::NEG_INFINITY, f64::max);
            if best.is_none_or(|(_, b)| peak > b + TIE) {
                best = Some((k, peak));
            }
        }
        let (k, _) = best.expect("candidate left");
        chosen[k] = true;
        for (t, m) in total.iter_mut().zip(&unit[k].1) {
            *t += current * m;
        }
        loads = loads.with(unit[k].0, current);
    }
    Ok(loads)
}

/// Cached analysis of one network: placements, maps, NAPSAA and headroom,
/// all evaluated at an extra per-TSV resistance on top of the network's own.
pub struct Analyzer<'a> {
    layout: &'a PdnLayout,
    sweep: TsvSweep<'a>,
    base_units: OnceLock<Vec<(u32, Vec<f64>)>>,
}

impl<'a> Analyzer<'a> {
    pub fn new(layout: &'a PdnLayout, network: &'a ResistorNetwork) -> Result<Self> {
        if network.top_grid.is_none() {
            return Err(Error::InvalidParams("network has no top-tier rail grid".into()));
        }
        Ok(Analyzer { layout, sweep: TsvSweep::new(network)?, base_units: OnceLock::new() })
    }

    pub fn network(&self) -> &'a ResistorNetwork {
        self.sweep.network()
    }

    pub fn layout(&self) -> &'a PdnLayout {
        self.layout
    }

    pub fn default_policy(&self) -> PlacementPolicy {
        PlacementPolicy::default_for(self.layout.design)
    }

    fn current(&self) -> f64 {
        self.network().saa_current
    }

    /// Top-tier droop map (volts) of a unit current at each subarray.
    pub fn unit_maps(&self, extra: f64) -> Result<Vec<(u32, Vec<f64>)>> {
        if extra == 0.0 {
            if let Some(u) = self.base_units.get() {
                return Ok(u.clone());
            }
        }
        let network = self.network();
        let ids = network.subarray_ids();
        let loads: Vec<_> = ids.iter().map(|&id| LoadSet::new().with(id, 1.0)).collect();
        let droops = self.sweep.at(extra)?.droops(&loads)?;
        let maps: Vec<_> = ids.into_iter().zip(droops).map(|(id, d)| (id, d.top_map(network).expect("grid"))).collect();
        if extra == 0.0 {
            let _ = self.base_units.set(maps.clone());
        }
        Ok(maps)
    }

    pub fn place(&self, n: usize, policy: PlacementPolicy, extra: f64) -> Result<LoadSet> {
        if n == 0 || n > self.layout.subarray_count() {
            return Err(Error::InvalidCount(n));
        }
        match policy {
            PlacementPolicy::UniformPerSection => uniform_per_section(self.layout, n, self.current()),
            PlacementPolicy::AdversarialGreedy => greedy(&self.unit_maps(extra)?, n, self.current()),
        }
    }

    pub fn map(&self, loads: &LoadSet, extra: f64) -> Result<IrDropMap> {
        let droop = self.sweep.at(extra)?.droop(loads)?;
        IrDropMap::from_droop(self.network(), loads, &droop)
    }

    pub fn max_droop_mv(&self, loads: &LoadSet, extra: f64) -> Result<f64> {
        Ok(self.map(loads, extra)?.max_droop)
    }

    pub fn napsaa(&self, margin_mv: f64, policy: PlacementPolicy, extra: f64) -> Result<usize> {
        if !(margin_mv > 0.0) {
            return Err(Error::InvalidParams(format!("margin must be positive, got {margin_mv}")));
        }
        for n in LEVELS.into_iter().filter(|&n| n <= self.layout.subarray_count()) {
            let loads = self.place(n, policy, extra)?;
            if self.max_droop_mv(&loads, extra)? <= margin_mv {
                return Ok(n);
            }
        }
        Ok(0)
    }

    /// Largest uniform per-TSV extra resistance keeping `loads` within the margin.
    pub fn headroom_for(&self, loads: &LoadSet, margin_mv: f64) -> Result<f64> {
        let droop0 = self.max_droop_mv(loads, 0.0)?;
        if droop0 > margin_mv {
            return Err(Error::UnachievableLevel { level: loads.len(), droop_mv: droop0, margin_mv });
        }
        if self.max_droop_mv(loads, HEADROOM_MAX)? <= margin_mv {
            return Ok(HEADROOM_MAX);
        }
        let (mut lo, mut hi) = (0.0, HEADROOM_MAX);
        while hi - lo > HEADROOM_TOL {
            let mid = 0.5 * (lo + hi);
            if self.max_droop_mv(loads, mid)? <= margin_mv {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }

    pub fn headroom(&self, n: usize, margin_mv: f64, policy: PlacementPolicy) -> Result<f64> {
        let loads = self.place(n, policy, 0.0)?;
        self.headroom_for(&loads, margin_mv)
    }
}

pub fn place_saas(layout: &PdnLayout, network: &ResistorNetwork, n: usize, policy: PlacementPolicy) -> Result<LoadSet> {
    if policy == PlacementPolicy::UniformPerSection {
        if n == 0 || n > layout.subarray_count() {
            return Err(Error::InvalidCount(n));
        }
        return uniform_per_section(layout, n, network.saa_current);
    }
    Analyzer::new(layout, network)?.place(n, policy, 0.0)
}

pub fn find_napsaa(layout: &PdnLayout, network: &ResistorNetwork, margin_mv: f64, policy: PlacementPolicy) -> Result<usize> {
    Analyzer::new(layout, network)?.napsaa(margin_mv, policy, 0.0)
}

pub fn resistance_headroom(layout: &PdnLayout, network: &ResistorNetwork, n: usize, margin_mv: f64) -> Result<f64> {
    let a = Analyzer::new(layout, network)?;
    a.headroom(n, margin_mv, a.default_policy())
}
