//! Resistive mesh construction: rail grids per tier, TSV chains and supply terminals.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::geometry::{Design, PdnLayout, PdnParams, Polarity, StackConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Net {
    P,
    G,
}

impl Net {
    pub const BOTH: [Net; 2] = [Net::P, Net::G];

    fn of(p: Polarity) -> Net {
        match p {
            Polarity::P => Net::P,
            Polarity::G => Net::G,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Node {
    pub id: usize,
    pub net: Net,
    /// 0 = package bump plane, 1 = logic, then DRAM tiers upward.
    pub layer: u32,
    pub grid: Option<(u32, u32)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    Rail,
    Tsv,
    Package,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    /// siemens
    pub conductance: f64,
    pub kind: EdgeKind,
}

/// Where one subarray draws and returns its current; weights sum to 1.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LoadPoint {
    pub p_nodes: Vec<(usize, f64)>,
    pub g_nodes: Vec<(usize, f64)>,
}

impl LoadPoint {
    pub fn single(p: usize, g: usize) -> Self {
        LoadPoint { p_nodes: vec![(p, 1.0)], g_nodes: vec![(g, 1.0)] }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LoadSet {
    pub entries: BTreeMap<u32, f64>,
}

impl LoadSet {
    pub fn new() -> Self {
        LoadSet::default()
    }

    pub fn uniform(ids: impl IntoIterator<Item = u32>, current: f64) -> Self {
        LoadSet { entries: ids.into_iter().map(|id| (id, current)).collect() }
    }

    pub fn with(mut self, id: u32, current: f64) -> Self {
        *self.entries.entry(id).or_insert(0.0) += current;
        self
    }

    pub fn sum(&self, other: &LoadSet) -> LoadSet {
        let mut out = self.clone();
        for (&id, &i) in &other.entries {
            out = out.with(id, i);
        }
        out
    }

    pub fn scaled(&self, k: f64) -> LoadSet {
        LoadSet { entries: self.entries.iter().map(|(&id, &i)| (id, i * k)).collect() }
    }

    pub fn ids(&self) -> Vec<u32> {
        self.entries.keys().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Top-tier grid node ids, row-major from the bottom-left corner.
#[derive(Debug, Clone, PartialEq)]
pub struct TopGrid {
    pub nx: usize,
    pub ny: usize,
    pub p: Vec<usize>,
    pub g: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ResistorNetwork {
    pub design: Option<Design>,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub supply_p: usize,
    pub supply_g: usize,
    pub supply_voltage: f64,
    pub load_points: BTreeMap<u32, LoadPoint>,
    /// Per TSV, its chain of edge ids from the bump plane upward.
    pub tsv_edges: Vec<Vec<usize>>,
    /// Nominal series resistance of each TSV chain.
    pub tsv_base_resistance: Vec<f64>,
    /// Uniform extra resistance currently applied to every chain.
    pub tsv_extra: f64,
    pub top_grid: Option<TopGrid>,
    pub saa_current: f64,
}

impl ResistorNetwork {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn supply(&self, net: Net) -> usize {
        match net {
            Net::P => self.supply_p,
            Net::G => self.supply_g,
        }
    }

    /// Nominal TSV chain resistance, taken from the first chain.
    pub fn nominal_tsv_resistance(&self) -> f64 {
        self.tsv_base_resistance.first().copied().unwrap_or(0.0)
    }

    pub fn subarray_ids(&self) -> Vec<u32> {
        self.load_points.keys().copied().collect()
    }

    pub fn to_netlist(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("* supply_p {} {:.6}\n", self.supply_p, self.supply_voltage));
        out.push_str(&format!("* supply_g {} 0\n", self.supply_g));
        for (id, e) in self.edges.iter().enumerate() {
            out.push_str(&format!("R{id} {} {} {:.5e}\n", e.a, e.b, 1.0 / e.conductance));
        }
        out
    }
}

#[derive(Debug, Default)]
pub struct NetworkBuilder {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    load_points: BTreeMap<u32, LoadPoint>,
    tsv_edges: Vec<Vec<usize>>,
}

impl NetworkBuilder {
    pub fn new() -> Self {
        NetworkBuilder::default()
    }

    pub fn add_node(&mut self, net: Net, layer: u32, grid: Option<(u32, u32)>) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node { id, net, layer, grid });
        id
    }

    pub fn add_edge(&mut self, a: usize, b: usize, resistance: f64, kind: EdgeKind) -> usize {
        self.edges.push(Edge { a, b, conductance: 1.0 / resistance, kind });
        self.edges.len() - 1
    }

    pub fn add_tsv_chain(&mut self, edges: Vec<usize>) {
        self.tsv_edges.push(edges);
    }

    pub fn set_load_point(&mut self, id: u32, point: LoadPoint) {
        self.load_points.insert(id, point);
    }

    pub fn finish(
        self,
        supply_p: usize,
        supply_g: usize,
        supply_voltage: f64,
        saa_current: f64,
        top_grid: Option<TopGrid>,
        design: Option<Design>,
    ) -> Result<ResistorNetwork> {
        let tsv_base_resistance = self
            .tsv_edges
            .iter()
            .map(|chain| chain.iter().map(|&e| 1.0 / self.edges[e].conductance).sum())
            .collect();
        let net = ResistorNetwork {
            design,
            nodes: self.nodes,
            edges: self.edges,
            supply_p,
            supply_g,
            supply_voltage,
            load_points: self.load_points,
            tsv_edges: self.tsv_edges,
            tsv_base_resistance,
            tsv_extra: 0.0,
            top_grid,
            saa_current,
        };
        validate(&net)?;
        Ok(net)
    }
}

fn validate(net: &ResistorNetwork) -> Result<()> {
    let n = net.nodes.len();
    for (id, node) in net.nodes.iter().enumerate() {
        if node.id != id {
            return Err(Error::InvalidParams(format!("node ids not dense at {id}")));
        }
    }
    if net.supply_p >= n || net.supply_g >= n {
        return Err(Error::InvalidParams("supply terminal out of range".into()));
    }
    if net.nodes[net.supply_p].net != Net::P || net.nodes[net.supply_g].net != Net::G {
        return Err(Error::InvalidParams("supply terminals on the wrong nets".into()));
    }
    for (id, e) in net.edges.iter().enumerate() {
        if e.a >= n || e.b >= n || e.a == e.b {
            return Err(Error::InvalidParams(format!("edge {id} has invalid endpoints")));
        }
        if !(e.conductance > 0.0 && e.conductance.is_finite()) {
            return Err(Error::InvalidParams(format!("edge {id} conductance {} not positive", e.conductance)));
        }
        if net.nodes[e.a].net != net.nodes[e.b].net {
            return Err(Error::InvalidParams(format!("edge {id} couples the P and G nets")));
        }
    }
    for (sa, lp) in &net.load_points {
        let ok = lp.p_nodes.iter().all(|&(i, _)| i < n && net.nodes[i].net == Net::P)
            && lp.g_nodes.iter().all(|&(i, _)| i < n && net.nodes[i].net == Net::G);
        if !ok {
            return Err(Error::InvalidParams(format!("subarray {sa} load point on the wrong net")));
        }
    }
    let adj = adjacency(net);
    for netk in Net::BOTH {
        let mut seen = vec![false; n];
        let mut stack = vec![net.supply(netk)];
        seen[net.supply(netk)] = true;
        while let Some(u) = stack.pop() {
            for &(v, _) in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        let missing = net.nodes.iter().filter(|nd| nd.net == netk && !seen[nd.id]).count();
        if missing > 0 {
            return Err(Error::DisconnectedNet(netk, missing));
        }
    }
    Ok(())
}

pub(crate) fn adjacency(net: &ResistorNetwork) -> Vec<Vec<(usize, usize)>> {
    let mut adj = vec![Vec::new(); net.nodes.len()];
    for (id, e) in net.edges.iter().enumerate() {
        adj[e.a].push((e.b, id));
        adj[e.b].push((e.a, id));
    }
    adj
}

pub fn build_network(layout: &PdnLayout, params: &PdnParams, stack: &StackConfig) -> Result<ResistorNetwork> {
    params.validate()?;
    stack.validate()?;
    let (nx, ny) = (params.vertical_rails, params.horizontal_rails);
    if layout.subarray_count() != stack.subarrays_per_bank {
        return Err(Error::InvalidParams(format!(
            "layout has {} subarrays, stack expects {}",
            layout.subarray_count(),
            stack.subarrays_per_bank
        )));
    }
    let dx = layout.bank_width / (nx - 1) as f64;
    let dy = layout.bank_height / (ny - 1) as f64;
    let scale = params.rail_conductance_scale;
    let r_h = params.sheet_resistance * dx / params.rail_width / scale;
    let r_v = params.sheet_resistance * dy / params.rail_width / scale;
    let tiers = stack.dram_layers;
    let first_tier_layer = 1 + stack.logic_layers as u32;

    let mut b = NetworkBuilder::new();
    // grid[net][tier][j * nx + i]
    let mut grid = [Vec::new(), Vec::new()];
    for net in Net::BOTH {
        for t in 0..tiers {
            let mut ids = Vec::with_capacity(nx * ny);
            for j in 0..ny {
                for i in 0..nx {
                    ids.push(b.add_node(net, first_tier_layer + t as u32, Some((i as u32, j as u32))));
                }
            }
            for j in 0..ny {
                for i in 0..nx {
                    if i + 1 < nx {
                        b.add_edge(ids[j * nx + i], ids[j * nx + i + 1], r_h, EdgeKind::Rail);
                    }
                    if j + 1 < ny {
                        b.add_edge(ids[j * nx + i], ids[(j + 1) * nx + i], r_v, EdgeKind::Rail);
                    }
                }
            }
            grid[net.index()].push(ids);
        }
    }

    let mut supply = [0; 2];
    let mut plane = [0; 2];
    for net in Net::BOTH {
        let s = b.add_node(net, 0, None);
        supply[net.index()] = s;
        plane[net.index()] = if params.package_resistance > 0.0 {
            let p = b.add_node(net, 0, None);
            b.add_edge(s, p, params.package_resistance, EdgeKind::Package);
            p
        } else {
            s
        };
    }

    let segment = if params.tsv_per_tier {
        params.tsv_c4_resistance
    } else {
        params.tsv_c4_resistance / tiers as f64
    };
    let reach = dx.max(dy);
    for (k, site) in layout.tsv_sites.iter().enumerate() {
        let i = (site.x / dx).round().clamp(0.0, (nx - 1) as f64) as usize;
        let j = (site.y / dy).round().clamp(0.0, (ny - 1) as f64) as usize;
        let dist = (site.x - i as f64 * dx).hypot(site.y - j as f64 * dy);
        if dist > reach {
            return Err(Error::DegenerateGeometry(format!(
                "TSV {k} at ({:.2}, {:.2}) µm is {dist:.2} µm from the nearest rail node",
                site.x, site.y
            )));
        }
        let net = Net::of(site.polarity);
        let mut below = plane[net.index()];
        let mut chain = Vec::with_capacity(tiers);
        for t in 0..tiers {
            let tap = grid[net.index()][t][j * nx + i];
            chain.push(b.add_edge(below, tap, segment, EdgeKind::Tsv));
            below = tap;
        }
        b.add_tsv_chain(chain);
    }

    let top = tiers - 1;
    let weight = 1.0 / nx as f64;
    for id in 1..=layout.subarray_count() as u32 {
        let (_, y) = layout.subarray_center(id).expect("id in range");
        let j = (y / dy).round().clamp(0.0, (ny - 1) as f64) as usize;
        let row = |net: Net| (0..nx).map(|i| (grid[net.index()][top][j * nx + i], weight)).collect();
        b.set_load_point(id, LoadPoint { p_nodes: row(Net::P), g_nodes: row(Net::G) });
    }

    let top_grid = TopGrid {
        nx,
        ny,
        p: grid[Net::P.index()][top].clone(),
        g: grid[Net::G.index()][top].clone(),
    };
    b.finish(
        supply[0],
        supply[1],
        params.supply_voltage,
        params.saa_current(),
        Some(top_grid),
        Some(layout.design),
    )
}

pub fn apply_tsv_resistance(network: &ResistorNetwork, per_tsv_extra: f64) -> Result<ResistorNetwork> {
    if per_tsv_extra < 0.0 || per_tsv_extra.is_nan() {
        return Err(Error::NegativeDelta(per_tsv_extra));
    }
    let mut out = network.clone();
    for (chain, &base) in out.tsv_edges.iter().zip(&out.tsv_base_resistance) {
        let g = chain.len() as f64 / (base + per_tsv_extra);
        for &e in chain {
            out.edges[e].conductance = g;
        }
    }
    out.tsv_extra = per_tsv_extra;
    Ok(out)
}
