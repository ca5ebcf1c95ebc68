#![allow(dead_code)]

use std::sync::OnceLock;

use tsvpdn::geometry::{build_layout, Design, PdnLayout, PdnParams, Section, StackConfig};
use tsvpdn::irdrop::Analyzer;
use tsvpdn::netlist::{build_network, EdgeKind, LoadPoint, LoadSet, Net, NetworkBuilder, ResistorNetwork, TopGrid};

pub const TOY_V: f64 = 1.5;

/// 3×3 rail mesh per net on one tier. P enters at two opposite corners,
/// G at the other two. Subarray `1 + i + 3j` loads mesh node (i, j).
pub fn toy_3x3() -> ResistorNetwork {
    let mut b = NetworkBuilder::new();
    let supply_p = b.add_node(Net::P, 0, None);
    let supply_g = b.add_node(Net::G, 0, None);
    let mut grid = [[0usize; 9]; 2];
    for (k, net) in Net::BOTH.into_iter().enumerate() {
        for j in 0..3 {
            for i in 0..3 {
                grid[k][i + 3 * j] = b.add_node(net, 1, Some((i as u32, j as u32)));
            }
        }
        for j in 0..3 {
            for i in 0..3 {
                let here = grid[k][i + 3 * j];
                if i + 1 < 3 {
                    b.add_edge(here, grid[k][i + 1 + 3 * j], 0.1 + 0.01 * (i + j) as f64, EdgeKind::Rail);
                }
                if j + 1 < 3 {
                    b.add_edge(here, grid[k][i + 3 * (j + 1)], 0.12, EdgeKind::Rail);
                }
            }
        }
    }
    for (k, supply, corners) in [(0, supply_p, [0, 8]), (1, supply_g, [2, 6])] {
        for c in corners {
            let e = b.add_edge(supply, grid[k][c], 0.2, EdgeKind::Tsv);
            b.add_tsv_chain(vec![e]);
        }
    }
    for c in 0..9 {
        b.set_load_point(1 + c as u32, LoadPoint::single(grid[0][c], grid[1][c]));
    }
    let top = TopGrid { nx: 3, ny: 3, p: grid[0].to_vec(), g: grid[1].to_vec() };
    b.finish(supply_p, supply_g, TOY_V, 0.1, Some(top), None).unwrap()
}

/// Supply, one TSV and one rail segment per net around a single load.
/// The loop resistance is `2 (tsv + rail)`.
pub fn toy_loop(tsv: f64, rail: f64) -> ResistorNetwork {
    let mut b = NetworkBuilder::new();
    let sp = b.add_node(Net::P, 0, None);
    let sg = b.add_node(Net::G, 0, None);
    let mut load = [0usize; 2];
    for (k, (net, supply)) in [(Net::P, sp), (Net::G, sg)].into_iter().enumerate() {
        let tap = b.add_node(net, 1, Some((0, 1)));
        load[k] = b.add_node(net, 1, Some((0, 0)));
        let e = b.add_edge(supply, tap, tsv, EdgeKind::Tsv);
        b.add_tsv_chain(vec![e]);
        b.add_edge(tap, load[k], rail, EdgeKind::Rail);
    }
    b.set_load_point(1, LoadPoint::single(load[0], load[1]));
    let top = TopGrid { nx: 1, ny: 1, p: vec![load[0]], g: vec![load[1]] };
    b.finish(sp, sg, TOY_V, 0.1, Some(top), None).unwrap()
}

pub fn toy_layout(subarrays: usize) -> PdnLayout {
    PdnLayout {
        design: Design::Clustered,
        bank_width: 1.0,
        bank_height: 1.0,
        tsv_sites: Vec::new(),
        sections: vec![Section { y_min: 0.0, y_max: 1.0, subarrays: (1..=subarrays as u32).collect() }],
        subarray_centers: vec![(0.5, 0.5); subarrays],
    }
}

/// Node voltages by Gaussian elimination with partial pivoting on the full
/// nodal matrix; supply rows are pinned.
pub fn dense_voltages(net: &ResistorNetwork, loads: &LoadSet) -> Vec<f64> {
    let n = net.nodes.len();
    let mut a = vec![vec![0.0; n + 1]; n];
    for e in &net.edges {
        a[e.a][e.a] += e.conductance;
        a[e.b][e.b] += e.conductance;
        a[e.a][e.b] -= e.conductance;
        a[e.b][e.a] -= e.conductance;
    }
    for (&id, &current) in &loads.entries {
        let lp = &net.load_points[&id];
        for &(p, w) in &lp.p_nodes {
            a[p][n] -= current * w;
        }
        for &(g, w) in &lp.g_nodes {
            a[g][n] += current * w;
        }
    }
    for (s, v) in [(net.supply_p, net.supply_voltage), (net.supply_g, 0.0)] {
        a[s] = vec![0.0; n + 1];
        a[s][s] = 1.0;
        a[s][n] = v;
    }
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs())).unwrap();
        a.swap(col, piv);
        for row in 0..n {
            if row != col && a[row][col] != 0.0 {
                let f = a[row][col] / a[col][col];
                for k in col..=n {
                    a[row][k] -= f * a[col][k];
                }
            }
        }
    }
    (0..n).map(|i| a[i][n] / a[i][i]).collect()
}

pub struct Canonical {
    pub layout: PdnLayout,
    pub network: ResistorNetwork,
}

pub fn canonical(design: Design) -> &'static Canonical {
    static C: [OnceLock<Canonical>; 2] = [OnceLock::new(), OnceLock::new()];
    let idx = Design::ALL.iter().position(|&d| d == design).unwrap();
    C[idx].get_or_init(|| {
        let params = PdnParams::canonical(design);
        let stack = StackConfig::default();
        let layout = build_layout(design, &params, &stack).unwrap();
        let network = build_network(&layout, &params, &stack).unwrap();
        Canonical { layout, network }
    })
}

pub fn analyzer(design: Design) -> &'static Analyzer<'static> {
    static A: [OnceLock<Analyzer<'static>>; 2] = [OnceLock::new(), OnceLock::new()];
    let idx = Design::ALL.iter().position(|&d| d == design).unwrap();
    A[idx].get_or_init(|| {
        let c = canonical(design);
        Analyzer::new(&c.layout, &c.network).unwrap()
    })
}

pub fn context(design: Design) -> &'static tsvpdn::aging::AgingContext<'static> {
    static X: [OnceLock<tsvpdn::aging::AgingContext<'static>>; 2] = [OnceLock::new(), OnceLock::new()];
    let idx = Design::ALL.iter().position(|&d| d == design).unwrap();
    X[idx].get_or_init(|| {
        let c = canonical(design);
        tsvpdn::aging::AgingContext::new(Analyzer::new(&c.layout, &c.network).unwrap(), 75.0).unwrap()
    })
}
