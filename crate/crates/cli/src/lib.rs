//! Command implementations behind the `tsvpdn` binary.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use tsvpdn::aging::{lifetime_years, AgingContext, AgingSettings, AgingTimeline, WorkloadProfile, SECONDS_PER_YEAR};
use tsvpdn::config::{load_workload, parse_workload, DesignSelect, RunConfig};
use tsvpdn::geometry::{build_layout, Design, PdnLayout};
use tsvpdn::irdrop::{Analyzer, IrDropMap};
use tsvpdn::netlist::{build_network, ResistorNetwork};
use tsvpdn::perf::{edp_csv, edp_over_lifetime, estimate_performance, normalize_edp, EdpPoint, RHO_CAP};
use tsvpdn::solver::worst_effective_resistance;
use tsvpdn::{Error, Result};

pub const BUNDLED_WORKLOADS: [(&str, &str); 9] = [
    ("blackscholes", include_str!("../../../workloads/blackscholes.wl")),
    ("bodytrack", include_str!("../../../workloads/bodytrack.wl")),
    ("canneal", include_str!("../../../workloads/canneal.wl")),
    ("dedup", include_str!("../../../workloads/dedup.wl")),
    ("facesim", include_str!("../../../workloads/facesim.wl")),
    ("ferret", include_str!("../../../workloads/ferret.wl")),
    ("fluidanimate", include_str!("../../../workloads/fluidanimate.wl")),
    ("streamcluster", include_str!("../../../workloads/streamcluster.wl")),
    ("x264", include_str!("../../../workloads/x264.wl")),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Layout,
    Netlist,
    Rw,
    Irmap,
    Napsaa,
    Headroom,
    Age,
    Lifetime,
    Perf,
    Compare,
}

/// Everything a command produced: text for stdout and files written.
#[derive(Debug, Default)]
pub struct Report {
    pub stdout: String,
    pub files: Vec<PathBuf>,
}

pub fn bundled_workloads() -> Result<Vec<WorkloadProfile>> {
    BUNDLED_WORKLOADS.iter().map(|(_, text)| parse_workload(text)).collect()
}

/// Profiles from the config, or the bundled set when none are given.
pub fn workloads(cfg: &RunConfig) -> Result<Vec<WorkloadProfile>> {
    if cfg.workloads.is_empty() {
        bundled_workloads()
    } else {
        cfg.workloads.iter().map(|p| load_workload(p)).collect()
    }
}

/// Ω to 6 significant digits.
pub fn ohms(v: f64) -> String {
    if !v.is_finite() {
        return "inf".into();
    }
    if v == 0.0 {
        return "0.00000".into();
    }
    let decimals = (5 - v.abs().log10().floor() as i32).max(0) as usize;
    format!("{v:.decimals$}")
}

fn years(v: Option<f64>) -> String {
    v.map_or_else(|| "none".into(), |y| format!("{y:.2}"))
}

fn file_stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

struct Built {
    design: Design,
    layout: PdnLayout,
    network: ResistorNetwork,
}

fn build(cfg: &RunConfig, design: Design) -> Result<Built> {
    let params = cfg.pdn(design);
    let layout = build_layout(design, params, &cfg.stack)?;
    let network = build_network(&layout, params, &cfg.stack)?;
    Ok(Built { design, layout, network })
}

fn build_all(cfg: &RunConfig, designs: &[Design]) -> Result<Vec<Built>> {
    designs.par_iter().map(|&d| build(cfg, d)).collect()
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl Writer<'_> {
    fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(self.dir).map_err(|source| Error::Io { path: self.dir.to_path_buf(), source })?;
        let path = self.dir.join(name);
        self.files.push(path.clone());
        std::fs::write(&path, contents).map_err(|source| Error::Io { path: path.clone(), source })?;
        Ok(path)
    }

    fn discard(&self) {
        for f in &self.files {
            let _ = std::fs::remove_file(f);
        }
    }
}

pub struct AgingRun {
    pub design: Design,
    pub workload: WorkloadProfile,
    pub timeline: AgingTimeline,
}

fn settings(cfg: &RunConfig) -> AgingSettings {
    AgingSettings {
        em: cfg.em.clone(),
        model: cfg.void_model.clone(),
        horizon: cfg.horizon_years * SECONDS_PER_YEAR,
        ..AgingSettings::default()
    }
}

struct Pipeline<'a> {
    contexts: Vec<(Design, AgingContext<'a>)>,
}

impl<'a> Pipeline<'a> {
    fn new(cfg: &RunConfig, built: &'a [Built]) -> Result<Self> {
        let contexts = built
            .par_iter()
            .map(|b| {
                let analyzer = Analyzer::new(&b.layout, &b.network)?;
                Ok((b.design, AgingContext::new(analyzer, cfg.margin_mv)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Pipeline { contexts })
    }

    fn age(&self, cfg: &RunConfig, wls: &[WorkloadProfile]) -> Result<Vec<AgingRun>> {
        let s = settings(cfg);
        let jobs: Vec<_> = self.contexts.iter().flat_map(|c| wls.iter().map(move |w| (c, w))).collect();
        jobs.par_iter()
            .map(|((design, ctx), wl)| {
                Ok(AgingRun { design: *design, workload: (*wl).clone(), timeline: ctx.simulate(wl, &s)? })
            })
            .collect()
    }
}

/// EDP series per run, normalised to the clustered design's EDP at 0 years
/// for the same workload (or the run's own when clustered is not selected).
fn edp_series(cfg: &RunConfig, runs: &[AgingRun]) -> Result<Vec<(Vec<EdpPoint>, Vec<EdpPoint>)>> {
    let mut baseline = BTreeMap::new();
    for r in runs.iter().filter(|r| r.design == Design::Clustered) {
        if let Some(e) = r.timeline.events.first() {
            baseline.insert(r.workload.name.clone(), estimate_performance(&r.workload, e.napsaa, &cfg.timing)?.edp);
        }
    }
    runs.iter()
        .map(|r| {
            let raw = edp_over_lifetime(&r.timeline, &r.workload, &cfg.timing)?;
            let base = baseline.get(&r.workload.name).copied().unwrap_or(raw.first().map_or(0.0, |p| p.edp));
            let norm = normalize_edp(&raw, base)?;
            Ok((raw, norm))
        })
        .collect()
}

fn summary(runs: &[AgingRun]) -> String {
    runs.iter().map(|r| r.timeline.summary()).collect::<Vec<_>>().join("\n")
}

pub fn run_command(cmd: Command, cfg: &RunConfig, n: Option<usize>) -> Result<Report> {
    let mut w = Writer { dir: &cfg.out, files: Vec::new() };
    match execute(cmd, cfg, n, &mut w) {
        Ok(stdout) => Ok(Report { stdout, files: w.files }),
        Err(e) => {
            w.discard();
            Err(e)
        }
    }
}

fn execute(cmd: Command, cfg: &RunConfig, n: Option<usize>, w: &mut Writer<'_>) -> Result<String> {
    let designs = cfg.design.designs();
    let mut out = String::new();
    match cmd {
        Command::Layout => {
            for d in designs {
                let layout = build_layout(d, cfg.pdn(d), &cfg.stack)?;
                let path = w.write(&format!("layout_{d}.csv"), &layout.to_csv())?;
                writeln!(
                    out,
                    "{d}: {} TSV sites, bank {:.1} x {:.1} um -> {}",
                    layout.tsv_sites.len(),
                    layout.bank_width,
                    layout.bank_height,
                    path.display()
                )
                .unwrap();
            }
        }
        Command::Netlist => {
            for b in build_all(cfg, &designs)? {
                let path = w.write(&format!("netlist_{}.sp", b.design), &b.network.to_netlist())?;
                writeln!(
                    out,
                    "{}: {} nodes, {} resistors -> {}",
                    b.design,
                    b.network.node_count(),
                    b.network.edges.len(),
                    path.display()
                )
                .unwrap();
            }
        }
        Command::Rw => {
            for b in build_all(cfg, &designs)? {
                let (id, r) = worst_effective_resistance(&b.network)?;
                writeln!(out, "{}: {} ohm (subarray {id})", b.design, ohms(r)).unwrap();
            }
        }
        Command::Irmap => {
            for b in build_all(cfg, &designs)? {
                let a = Analyzer::new(&b.layout, &b.network)?;
                let policy = a.default_policy();
                let k = match n {
                    Some(k) => k,
                    None => a.napsaa(cfg.margin_mv, policy, 0.0)?.max(1),
                };
                let map = a.map(&a.place(k, policy, 0.0)?, 0.0)?;
                let path = w.write(&format!("irmap_{}_n{k}.csv", b.design), &map.to_csv())?;
                writeln!(out, "{}: n={k} max_droop {:.2} mV -> {}", b.design, map.max_droop, path.display()).unwrap();
            }
        }
        Command::Napsaa => {
            for b in build_all(cfg, &designs)? {
                let a = Analyzer::new(&b.layout, &b.network)?;
                writeln!(out, "{}: {}", b.design, a.napsaa(cfg.margin_mv, a.default_policy(), 0.0)?).unwrap();
            }
        }
        Command::Headroom => {
            let built = build_all(cfg, &designs)?;
            let pipe = Pipeline::new(cfg, &built)?;
            let mut csv = String::from("design,level,delta_r_max_ohm\n");
            for (d, ctx) in &pipe.contexts {
                for (level, h) in ctx.schedule().into_iter().rev() {
                    writeln!(csv, "{d},{level},{}", ohms(h)).unwrap();
                }
            }
            w.write("headroom.csv", &csv)?;
            out.push_str(&csv);
        }
        Command::Age | Command::Lifetime | Command::Perf => {
            let wls = workloads(cfg)?;
            let built = build_all(cfg, &designs)?;
            let runs = Pipeline::new(cfg, &built)?.age(cfg, &wls)?;
            match cmd {
                Command::Age => {
                    for r in &runs {
                        let name = format!("timeline_{}_{}.csv", r.design, file_stem(&r.workload.name));
                        let path = w.write(&name, &r.timeline.to_csv())?;
                        writeln!(
                            out,
                            "{} {}: lifetime {} years, {} events -> {}",
                            r.design,
                            r.workload.name,
                            years(lifetime_years(&r.timeline)),
                            r.timeline.events.len(),
                            path.display()
                        )
                        .unwrap();
                    }
                }
                Command::Lifetime => {
                    let text = summary(&runs);
                    w.write("lifetime_summary.txt", &text)?;
                    out.push_str(&text);
                }
                _ => {
                    for (r, (raw, norm)) in runs.iter().zip(edp_series(cfg, &runs)?) {
                        let name = format!("edp_{}_{}.csv", r.design, file_stem(&r.workload.name));
                        let path = w.write(&name, &edp_csv(&raw, &norm))?;
                        let first = norm.first().map_or(f64::NAN, |p| p.edp);
                        writeln!(out, "{} {}: normalized EDP at 0 years {first:.4} -> {}", r.design, r.workload.name, path.display())
                            .unwrap();
                    }
                }
            }
        }
        Command::Compare => {
            let text = compare(cfg)?.report;
            let path = w.write("compare_report.txt", &text)?;
            writeln!(out, "report -> {}", path.display()).unwrap();
        }
    }
    Ok(out)
}

/// Per-workload lifetime ratio and EDP ordering between the designs.
pub struct Comparison {
    pub workload: String,
    pub lifetime_clustered: Option<f64>,
    pub lifetime_distributed: Option<f64>,
    /// distributed / clustered, horizon-reached lifetimes read as the horizon.
    pub ratio: f64,
    /// Normalised EDP of distributed ≤ clustered at t = 0 and every event time of either design.
    pub edp_ordered: bool,
}

fn step_at(series: &[EdpPoint], t: f64) -> f64 {
    series.iter().take_while(|p| p.t_years <= t).last().map_or(f64::INFINITY, |p| p.edp)
}

pub fn comparisons(cfg: &RunConfig, runs: &[AgingRun]) -> Result<Vec<Comparison>> {
    let series = edp_series(cfg, runs)?;
    let horizon = cfg.horizon_years;
    let mut out = Vec::new();
    for (i, rc) in runs.iter().enumerate().filter(|(_, r)| r.design == Design::Clustered) {
        let Some((j, rd)) = runs
            .iter()
            .enumerate()
            .find(|(_, r)| r.design == Design::Distributed && r.workload.name == rc.workload.name)
        else {
            continue;
        };
        let (lc, ld) = (lifetime_years(&rc.timeline), lifetime_years(&rd.timeline));
        let ratio = ld.unwrap_or(horizon) / lc.unwrap_or(horizon);
        let (nc, nd) = (&series[i].1, &series[j].1);
        let mut times: Vec<f64> = nc.iter().chain(nd).map(|p| p.t_years).collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        let edp_ordered = times.iter().all(|&t| step_at(nd, t) <= step_at(nc, t));
        out.push(Comparison {
            workload: rc.workload.name.clone(),
            lifetime_clustered: lc,
            lifetime_distributed: ld,
            ratio,
            edp_ordered,
        });
    }
    Ok(out)
}

pub struct CompareOutput {
    pub report: String,
    pub comparisons: Vec<Comparison>,
}

pub fn compare(cfg: &RunConfig) -> Result<CompareOutput> {
    let mut cfg = cfg.clone();
    cfg.design = DesignSelect::Both;
    let wls = workloads(&cfg)?;
    let built = build_all(&cfg, &Design::ALL)?;
    let rw: Vec<(u32, f64)> = built.par_iter().map(|b| worst_effective_resistance(&b.network)).collect::<Result<_>>()?;
    let pipe = Pipeline::new(&cfg, &built)?;
    let runs = pipe.age(&cfg, &wls)?;
    let cmp = comparisons(&cfg, &runs)?;

    let mut r = String::new();
    writeln!(r, "# tsvpdn compare report").unwrap();
    writeln!(r, "\n[config]").unwrap();
    r.push_str(&cfg.to_text());
    writeln!(r, "\n[effective_resistance]").unwrap();
    for (b, (id, v)) in built.iter().zip(&rw) {
        writeln!(r, "{}: {} ohm (subarray {id})", b.design, ohms(*v)).unwrap();
    }
    writeln!(r, "\n[napsaa]").unwrap();
    for (d, ctx) in &pipe.contexts {
        writeln!(r, "{d}: {}", ctx.initial_napsaa()).unwrap();
    }
    writeln!(r, "\n[max_droop_by_count]").unwrap();
    for (d, ctx) in &pipe.contexts {
        let a = ctx.analyzer();
        for k in [1usize, 2, 4, 8, 16, 32] {
            let loads = a.place(k, a.default_policy(), 0.0)?;
            let map: IrDropMap = a.map(&loads, 0.0)?;
            writeln!(r, "{d} n={k}: {:.2} mV", map.max_droop).unwrap();
        }
    }
    writeln!(r, "\n[headroom]").unwrap();
    writeln!(r, "design,level,delta_r_max_ohm").unwrap();
    for (d, ctx) in &pipe.contexts {
        for (level, h) in ctx.schedule().into_iter().rev() {
            writeln!(r, "{d},{level},{}", ohms(h)).unwrap();
        }
    }
    writeln!(r, "\n[lifetime]").unwrap();
    writeln!(r, "workload,clustered_years,distributed_years,ratio,edp_distributed_le_clustered").unwrap();
    for c in &cmp {
        writeln!(
            r,
            "{},{},{},{:.3},{}",
            c.workload,
            years(c.lifetime_clustered),
            years(c.lifetime_distributed),
            c.ratio,
            c.edp_ordered
        )
        .unwrap();
    }
    if !cmp.is_empty() {
        let mean = cmp.iter().map(|c| c.ratio).sum::<f64>() / cmp.len() as f64;
        writeln!(r, "mean_ratio = {mean:.3}").unwrap();
    }
    writeln!(r, "\n[edp_t0]").unwrap();
    for run in runs.iter() {
        if let Some(e) = run.timeline.events.first() {
            let p = estimate_performance(&run.workload, e.napsaa.max(1), &cfg.timing)?;
            writeln!(r, "{} {}: napsaa {} edp {:.5e} J*s", run.design, run.workload.name, e.napsaa, p.edp).unwrap();
        }
    }
    writeln!(r, "\n[notes]").unwrap();
    writeln!(r, "queueing utilisation capped at rho = {RHO_CAP}").unwrap();
    writeln!(r, "\n[summaries]").unwrap();
    r.push_str(&summary(&runs));
    Ok(CompareOutput { report: r, comparisons: cmp })
}
