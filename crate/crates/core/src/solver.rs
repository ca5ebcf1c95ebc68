//! Nodal analysis of the P and G meshes.
//!
//! The two nets share no edges, so each is solved on its own as a grounded
//! Laplacian in droop form: `u = V - v` on P, `v` on G. Loads then enter as
//! positive injections and the system is symmetric positive definite.

use std::sync::Once;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt as SparseLlt, SymbolicLlt};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::netlist::{EdgeKind, LoadSet, Net, ResistorNetwork};

pub const DEFAULT_TOLERANCE: f64 = 1e-9;
const NONE: usize = usize::MAX;

fn sequential() {
    static INIT: Once = Once::new();
    INIT.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    /// Indexed by node id.
    pub voltages: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Droop per node: `V - v` on P nodes, `v` on G nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Droop(pub Vec<f64>);

impl Droop {
    pub fn at_load(&self, network: &ResistorNetwork, id: u32) -> f64 {
        let lp = &network.load_points[&id];
        lp.p_nodes.iter().chain(&lp.g_nodes).map(|&(n, w)| w * self.0[n]).sum()
    }

    /// Top-tier droop map in volts, row-major from the bottom edge.
    pub fn top_map(&self, network: &ResistorNetwork) -> Option<Vec<f64>> {
        let g = network.top_grid.as_ref()?;
        Some(g.p.iter().zip(&g.g).map(|(&p, &q)| self.0[p] + self.0[q]).collect())
    }

    pub fn voltages(&self, network: &ResistorNetwork) -> Vec<f64> {
        network
            .nodes
            .iter()
            .zip(&self.0)
            .map(|(n, &d)| match n.net {
                Net::P => network.supply_voltage - d,
                Net::G => d,
            })
            .collect()
    }
}

/// Per-net local numbering that skips the supply terminal.
#[derive(Debug, Clone)]
struct Numbering {
    local: Vec<usize>,
    global: Vec<usize>,
}

impl Numbering {
    fn new(network: &ResistorNetwork, net: Net) -> Self {
        let supply = network.supply(net);
        let mut local = vec![NONE; network.nodes.len()];
        let mut global = Vec::new();
        for n in &network.nodes {
            if n.net == net && n.id != supply {
                local[n.id] = global.len();
                global.push(n.id);
            }
        }
        Numbering { local, global }
    }

    fn len(&self) -> usize {
        self.global.len()
    }
}

fn check_loads(network: &ResistorNetwork, loads: &LoadSet) -> Result<()> {
    for (&id, &i) in &loads.entries {
        if !network.load_points.contains_key(&id) {
            return Err(Error::InvalidLoad(format!("subarray {id} has no load point")));
        }
        if !(i >= 0.0 && i.is_finite()) {
            return Err(Error::InvalidLoad(format!("subarray {id} current {i} is not a non-negative number")));
        }
    }
    Ok(())
}

/// Right-hand sides for one net, one column per load set.
fn rhs(network: &ResistorNetwork, num: &Numbering, net: Net, loads: &[LoadSet]) -> Mat<f64> {
    let mut b = Mat::zeros(num.len(), loads.len());
    for (c, set) in loads.iter().enumerate() {
        for (&id, &i) in &set.entries {
            let lp = &network.load_points[&id];
            let nodes = match net {
                Net::P => &lp.p_nodes,
                Net::G => &lp.g_nodes,
            };
            for &(n, w) in nodes {
                let l = num.local[n];
                if l != NONE {
                    b[(l, c)] += i * w;
                }
            }
        }
    }
    b
}

fn factor(n: usize, triplets: &[Triplet<usize, usize, f64>]) -> Result<SparseLlt<usize, f64>> {
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, triplets)
        .map_err(|e| Error::SingularSystem(format!("assembly failed: {e:?}")))?;
    let sym = SymbolicLlt::try_new(a.symbolic(), Side::Lower)
        .map_err(|e| Error::SingularSystem(format!("symbolic factorization failed: {e:?}")))?;
    SparseLlt::try_new_with_symbolic(sym, a.as_ref(), Side::Lower)
        .map_err(|e| Error::SingularSystem(format!("matrix not positive definite: {e:?}")))
}

struct DirectNet {
    num: Numbering,
    llt: Option<SparseLlt<usize, f64>>,
}

impl DirectNet {
    fn new(network: &ResistorNetwork, net: Net) -> Result<Self> {
        let num = Numbering::new(network, net);
        let n = num.len();
        let mut diag = vec![0.0; n];
        let mut triplets = Vec::new();
        for e in &network.edges {
            if network.nodes[e.a].net != net {
                continue;
            }
            let (la, lb) = (num.local[e.a], num.local[e.b]);
            if la != NONE {
                diag[la] += e.conductance;
            }
            if lb != NONE {
                diag[lb] += e.conductance;
            }
            if la != NONE && lb != NONE {
                triplets.push(Triplet::new(la.max(lb), la.min(lb), -e.conductance));
            }
        }
        triplets.extend(diag.iter().enumerate().map(|(i, &d)| Triplet::new(i, i, d)));
        let llt = if n == 0 { None } else { Some(factor(n, &triplets)?) };
        Ok(DirectNet { num, llt })
    }

    fn solve(&self, b: &Mat<f64>) -> Mat<f64> {
        match &self.llt {
            Some(llt) => llt.solve(b),
            None => b.clone(),
        }
    }
}

/// Sparse Cholesky factors of both nets of one network.
pub struct Factorization<'a> {
    network: &'a ResistorNetwork,
    nets: [DirectNet; 2],
}

impl<'a> Factorization<'a> {
    pub fn new(network: &'a ResistorNetwork) -> Result<Self> {
        sequential();
        Ok(Factorization {
            network,
            nets: [DirectNet::new(network, Net::P)?, DirectNet::new(network, Net::G)?],
        })
    }

    pub fn droops(&self, loads: &[LoadSet]) -> Result<Vec<Droop>> {
        for l in loads {
            check_loads(self.network, l)?;
        }
        let mut out = vec![vec![0.0; self.network.nodes.len()]; loads.len()];
        for (k, dn) in self.nets.iter().enumerate() {
            let x = dn.solve(&rhs(self.network, &dn.num, Net::BOTH[k], loads));
            for (c, d) in out.iter_mut().enumerate() {
                for (l, &g) in dn.num.global.iter().enumerate() {
                    d[g] = x[(l, c)];
                }
            }
        }
        Ok(out.into_iter().map(Droop).collect())
    }

    pub fn solve(&self, loads: &LoadSet, tolerance: f64) -> Result<SolveResult> {
        let droop = self.droops(std::slice::from_ref(loads))?.remove(0);
        let residual = relative_residual(self.network, loads, &droop);
        if !(residual <= tolerance) {
            return Err(Error::NonConvergence { residual, tolerance });
        }
        Ok(SolveResult { voltages: droop.voltages(self.network), residual, iterations: 0 })
    }
}

/// Relative KCL residual of a droop solution, evaluated edge by edge.
pub fn relative_residual(network: &ResistorNetwork, loads: &LoadSet, droop: &Droop) -> f64 {
    let n = network.nodes.len();
    let mut r = vec![0.0; n];
    for (&id, &i) in &loads.entries {
        let lp = &network.load_points[&id];
        for &(k, w) in lp.p_nodes.iter().chain(&lp.g_nodes) {
            r[k] += i * w;
        }
    }
    let b_norm = r
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != network.supply_p && k != network.supply_g)
        .map(|(_, v)| v * v)
        .sum::<f64>()
        .sqrt();
    for e in &network.edges {
        let f = e.conductance * (droop.0[e.a] - droop.0[e.b]);
        r[e.a] -= f;
        r[e.b] += f;
    }
    let r_norm = (0..n)
        .filter(|&k| k != network.supply_p && k != network.supply_g)
        .map(|k| r[k] * r[k])
        .sum::<f64>()
        .sqrt();
    if b_norm > 0.0 {
        r_norm / b_norm
    } else {
        r_norm
    }
}

pub fn solve_node_voltages(network: &ResistorNetwork, loads: &LoadSet, tolerance: f64) -> Result<SolveResult> {
    check_loads(network, loads)?;
    Factorization::new(network)?.solve(loads, tolerance)
}

/// Loop resistance seen by a unit load at one subarray.
pub fn effective_resistance(network: &ResistorNetwork, subarray_id: u32) -> Result<f64> {
    let loads = LoadSet::new().with(subarray_id, 1.0);
    check_loads(network, &loads)?;
    let d = Factorization::new(network)?.droops(&[loads])?.remove(0);
    Ok(d.at_load(network, subarray_id))
}

/// Effective resistance of every subarray from one factorization.
pub fn effective_resistances(network: &ResistorNetwork) -> Result<Vec<(u32, f64)>> {
    let ids = network.subarray_ids();
    let loads: Vec<_> = ids.iter().map(|&id| LoadSet::new().with(id, 1.0)).collect();
    let d = Factorization::new(network)?.droops(&loads)?;
    Ok(ids.iter().zip(&d).map(|(&id, d)| (id, d.at_load(network, id))).collect())
}

/// Worst subarray and its resistance; ties go to the lowest id.
pub fn worst_effective_resistance(network: &ResistorNetwork) -> Result<(u32, f64)> {
    let all = effective_resistances(network)?;
    all.into_iter()
        .fold(None, |best: Option<(u32, f64)>, (id, r)| match best {
            Some((_, b)) if b >= r => best,
            _ => Some((id, r)),
        })
        .ok_or_else(|| Error::InvalidLoad("network has no load points".into()))
}

pub fn peak_current(r_worst: f64, margin_mv: f64) -> Result<f64> {
    if !(r_worst > 0.0) {
        return Err(Error::NonPositiveResistance(r_worst));
    }
    Ok(margin_mv * 1e-3 / r_worst)
}

/// One net split into TSV-adjacent nodes `T` and the rest `I`.
struct SchurNet {
    num: Numbering,
    i_nodes: Vec<usize>,
    t_nodes: Vec<usize>,
    a_ii: Option<SparseLlt<usize, f64>>,
    /// Columns of A_IT: (I position, value).
    a_it: Vec<Vec<(usize, f64)>>,
    a_tt_fixed: Mat<f64>,
    /// TSV edges: (T position or NONE, T position or NONE, chain index, segments).
    tsv: Vec<(usize, usize, usize, usize)>,
    /// A_TI A_II^-1 A_IT
    w: Mat<f64>,
}

impl SchurNet {
    fn new(network: &ResistorNetwork, net: Net) -> Result<Self> {
        let num = Numbering::new(network, net);
        let n = num.len();
        let mut is_t = vec![false; n];
        let mut chain_of = vec![NONE; network.edges.len()];
        for (c, chain) in network.tsv_edges.iter().enumerate() {
            for &e in chain {
                chain_of[e] = c;
                let edge = &network.edges[e];
                if network.nodes[edge.a].net != net {
                    continue;
                }
                for v in [edge.a, edge.b] {
                    if num.local[v] != NONE {
                        is_t[num.local[v]] = true;
                    }
                }
            }
        }
        let (mut in_i, mut in_t) = (vec![NONE; n], vec![NONE; n]);
        let (mut i_nodes, mut t_nodes) = (Vec::new(), Vec::new());
        for l in 0..n {
            if is_t[l] {
                in_t[l] = t_nodes.len();
                t_nodes.push(l);
            } else {
                in_i[l] = i_nodes.len();
                i_nodes.push(l);
            }
        }
        let (ni, nt) = (i_nodes.len(), t_nodes.len());
        let mut diag_i = vec![0.0; ni];
        let mut trip = Vec::new();
        let mut a_it = vec![Vec::new(); nt];
        let mut a_tt_fixed = Mat::zeros(nt, nt);
        let mut tsv = Vec::new();
        for (id, e) in network.edges.iter().enumerate() {
            if network.nodes[e.a].net != net {
                continue;
            }
            let (la, lb) = (num.local[e.a], num.local[e.b]);
            let pos = |l: usize, map: &Vec<usize>| if l == NONE { NONE } else { map[l] };
            if e.kind == EdgeKind::Tsv && chain_of[id] != NONE {
                let c = chain_of[id];
                tsv.push((pos(la, &in_t), pos(lb, &in_t), c, network.tsv_edges[c].len()));
                continue;
            }
            let g = e.conductance;
            for (l, other) in [(la, lb), (lb, la)] {
                if l == NONE {
                    continue;
                }
                if is_t[l] {
                    let t = in_t[l];
                    a_tt_fixed[(t, t)] += g;
                    if other != NONE {
                        if is_t[other] {
                            a_tt_fixed[(t, in_t[other])] -= g;
                        } else {
                            a_it[t].push((in_i[other], -g));
                        }
                    }
                } else {
                    let i = in_i[l];
                    diag_i[i] += g;
                    if other != NONE && !is_t[other] && l > other {
                        trip.push(Triplet::new(i.max(in_i[other]), i.min(in_i[other]), -g));
                    }
                }
            }
        }
        trip.extend(diag_i.iter().enumerate().map(|(i, &d)| Triplet::new(i, i, d)));
        let a_ii = if ni == 0 { None } else { Some(factor(ni, &trip)?) };
        let mut s = SchurNet { num, i_nodes, t_nodes, a_ii, a_it, a_tt_fixed, tsv, w: Mat::zeros(nt, nt) };
        const BATCH: usize = 32;
        let mut w = Mat::zeros(nt, nt);
        for start in (0..nt).step_by(BATCH) {
            let cols = BATCH.min(nt - start);
            let mut b = Mat::zeros(ni, cols);
            for c in 0..cols {
                for &(i, v) in &s.a_it[start + c] {
                    b[(i, c)] += v;
                }
            }
            let x = s.solve_ii(&b);
            for t in 0..nt {
                for c in 0..cols {
                    w[(t, start + c)] = s.a_it[t].iter().map(|&(i, v)| v * x[(i, c)]).sum();
                }
            }
        }
        s.w = w;
        Ok(s)
    }

    fn solve_ii(&self, b: &Mat<f64>) -> Mat<f64> {
        match &self.a_ii {
            Some(llt) => llt.solve(b),
            None => b.clone(),
        }
    }

    fn schur(&self, network: &ResistorNetwork, extra: f64) -> Result<Option<faer::linalg::solvers::Llt<f64>>> {
        let nt = self.t_nodes.len();
        if nt == 0 {
            return Ok(None);
        }
        let mut s = Mat::zeros(nt, nt);
        for r in 0..nt {
            for c in 0..nt {
                s[(r, c)] = self.a_tt_fixed[(r, c)] - self.w[(r, c)];
            }
        }
        for &(ta, tb, c, segs) in &self.tsv {
            let g = segs as f64 / (network.tsv_base_resistance[c] + network.tsv_extra + extra);
            if ta != NONE {
                s[(ta, ta)] += g;
            }
            if tb != NONE {
                s[(tb, tb)] += g;
            }
            if ta != NONE && tb != NONE {
                s[(ta, tb)] -= g;
                s[(tb, ta)] -= g;
            }
        }
        s.llt(Side::Lower)
            .map(Some)
            .map_err(|e| Error::SingularSystem(format!("reduced TSV system not positive definite: {e:?}")))
    }

    fn solve(&self, schur: &Option<faer::linalg::solvers::Llt<f64>>, b: &Mat<f64>) -> Mat<f64> {
        let k = b.ncols();
        let (ni, nt) = (self.i_nodes.len(), self.t_nodes.len());
        let mut b_i = Mat::zeros(ni, k);
        let mut b_t = Mat::zeros(nt, k);
        for c in 0..k {
            for (p, &l) in self.i_nodes.iter().enumerate() {
                b_i[(p, c)] = b[(l, c)];
            }
            for (p, &l) in self.t_nodes.iter().enumerate() {
                b_t[(p, c)] = b[(l, c)];
            }
        }
        let y = self.solve_ii(&b_i);
        let mut x = Mat::zeros(self.num.len(), k);
        let Some(llt) = schur else {
            for c in 0..k {
                for (p, &l) in self.i_nodes.iter().enumerate() {
                    x[(l, c)] = y[(p, c)];
                }
            }
            return x;
        };
        for t in 0..nt {
            for c in 0..k {
                b_t[(t, c)] -= self.a_it[t].iter().map(|&(i, v)| v * y[(i, c)]).sum::<f64>();
            }
        }
        let x_t = llt.solve(&b_t);
        let mut z = Mat::zeros(ni, k);
        for t in 0..nt {
            for &(i, v) in &self.a_it[t] {
                for c in 0..k {
                    z[(i, c)] += v * x_t[(t, c)];
                }
            }
        }
        let corr = self.solve_ii(&z);
        for c in 0..k {
            for (p, &l) in self.i_nodes.iter().enumerate() {
                x[(l, c)] = y[(p, c)] - corr[(p, c)];
            }
            for (p, &l) in self.t_nodes.iter().enumerate() {
                x[(l, c)] = x_t[(p, c)];
            }
        }
        x
    }
}

/// Reusable solver for a network whose TSV chains all carry the same extra
/// resistance. The rail meshes are factored once; each extra-resistance value
/// only needs a small dense factorization over the TSV tap nodes.
pub struct TsvSweep<'a> {
    network: &'a ResistorNetwork,
    nets: [SchurNet; 2],
}

pub struct SweepPoint<'s, 'a> {
    sweep: &'s TsvSweep<'a>,
    pub extra: f64,
    schur: [Option<faer::linalg::solvers::Llt<f64>>; 2],
}

impl<'a> TsvSweep<'a> {
    pub fn new(network: &'a ResistorNetwork) -> Result<Self> {
        sequential();
        Ok(TsvSweep { network, nets: [SchurNet::new(network, Net::P)?, SchurNet::new(network, Net::G)?] })
    }

    pub fn network(&self) -> &'a ResistorNetwork {
        self.network
    }

    pub fn at(&self, extra: f64) -> Result<SweepPoint<'_, 'a>> {
        if extra < 0.0 || extra.is_nan() {
            return Err(Error::NegativeDelta(extra));
        }
        Ok(SweepPoint {
            sweep: self,
            extra,
            schur: [self.nets[0].schur(self.network, extra)?, self.nets[1].schur(self.network, extra)?],
        })
    }
}

impl SweepPoint<'_, '_> {
    pub fn droops(&self, loads: &[LoadSet]) -> Result<Vec<Droop>> {
        let network = self.sweep.network;
        for l in loads {
            check_loads(network, l)?;
        }
        let mut out = vec![vec![0.0; network.nodes.len()]; loads.len()];
        for (k, sn) in self.sweep.nets.iter().enumerate() {
            let x = sn.solve(&self.schur[k], &rhs(network, &sn.num, Net::BOTH[k], loads));
            for (c, d) in out.iter_mut().enumerate() {
                for (l, &g) in sn.num.global.iter().enumerate() {
                    d[g] = x[(l, c)];
                }
            }
        }
        Ok(out.into_iter().map(Droop).collect())
    }

    pub fn droop(&self, loads: &LoadSet) -> Result<Droop> {
        Ok(self.droops(std::slice::from_ref(loads))?.remove(0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{LoadPoint, NetworkBuilder};

    fn series(r: f64) -> ResistorNetwork {
        let mut b = NetworkBuilder::new();
        let sp = b.add_node(Net::P, 0, None);
        let sg = b.add_node(Net::G, 0, None);
        let p = b.add_node(Net::P, 1, None);
        let g = b.add_node(Net::G, 1, None);
        let e = b.add_edge(sp, p, r, EdgeKind::Tsv);
        b.add_tsv_chain(vec![e]);
        let e = b.add_edge(sg, g, r, EdgeKind::Tsv);
        b.add_tsv_chain(vec![e]);
        b.set_load_point(1, LoadPoint::single(p, g));
        b.finish(sp, sg, 1.0, 0.1, None, None).unwrap()
    }

    #[test]
    fn peak_current_from_margin() {
        assert!((peak_current(0.12, 75.0).unwrap() - 0.625).abs() < 1e-12);
        assert!(matches!(peak_current(0.0, 75.0), Err(Error::NonPositiveResistance(_))));
    }

    #[test]
    fn series_loop() {
        let net = series(0.3);
        assert!((effective_resistance(&net, 1).unwrap() - 0.6).abs() < 1e-12);
        let s = solve_node_voltages(&net, &LoadSet::new().with(1, 0.5), DEFAULT_TOLERANCE).unwrap();
        assert!((s.voltages[2] - 0.85).abs() < 1e-12 && (s.voltages[3] - 0.15).abs() < 1e-12);
        assert!(s.residual < 1e-12);
    }

    #[test]
    fn rejects_bad_loads() {
        let net = series(0.3);
        assert!(matches!(solve_node_voltages(&net, &LoadSet::new().with(2, 0.1), 1e-9), Err(Error::InvalidLoad(_))));
        assert!(matches!(solve_node_voltages(&net, &LoadSet::new().with(1, -0.1), 1e-9), Err(Error::InvalidLoad(_))));
    }

    #[test]
    fn sweep_rejects_negative_extra() {
        let net = series(0.3);
        let sweep = TsvSweep::new(&net).unwrap();
        assert!(matches!(sweep.at(-1.0), Err(Error::NegativeDelta(_))));
        let d = sweep.at(0.2).unwrap().droop(&LoadSet::new().with(1, 1.0)).unwrap();
        assert!((d.at_load(&net, 1) - 1.0).abs() < 1e-12);
    }
}
