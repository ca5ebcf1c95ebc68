//! Line-oriented `key = value` run configuration and workload profiles.

use std::fmt;
use std::path::{Path, PathBuf};

use crate::aging::{WorkloadProfile, DEFAULT_HORIZON_YEARS};
use crate::em::{EmParams, VoidResistanceModel};
use crate::error::{Error, Result};
use crate::geometry::{Design, PdnParams, StackConfig};
use crate::perf::DramTiming;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignSelect {
    Clustered,
    Distributed,
    Both,
}

impl DesignSelect {
    pub fn designs(self) -> Vec<Design> {
        match self {
            DesignSelect::Clustered => vec![Design::Clustered],
            DesignSelect::Distributed => vec![Design::Distributed],
            DesignSelect::Both => Design::ALL.to_vec(),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "clustered" => Some(DesignSelect::Clustered),
            "distributed" => Some(DesignSelect::Distributed),
            "both" => Some(DesignSelect::Both),
            _ => None,
        }
    }
}

impl fmt::Display for DesignSelect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DesignSelect::Clustered => "clustered",
            DesignSelect::Distributed => "distributed",
            DesignSelect::Both => "both",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub design: DesignSelect,
    pub clustered: PdnParams,
    pub distributed: PdnParams,
    pub em: EmParams,
    pub void_model: VoidResistanceModel,
    pub void_table: Option<PathBuf>,
    pub timing: DramTiming,
    pub stack: StackConfig,
    pub workloads: Vec<PathBuf>,
    pub out: PathBuf,
    pub horizon_years: f64,
    pub margin_mv: f64,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            design: DesignSelect::Both,
            clustered: PdnParams::clustered(),
            distributed: PdnParams::distributed(),
            em: EmParams::default(),
            void_model: VoidResistanceModel::AnalyticBlockage,
            void_table: None,
            timing: DramTiming::default(),
            stack: StackConfig::default(),
            workloads: Vec::new(),
            out: PathBuf::from("out"),
            horizon_years: DEFAULT_HORIZON_YEARS,
            margin_mv: 75.0,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn pdn(&self, design: Design) -> &PdnParams {
        match design {
            Design::Clustered => &self.clustered,
            Design::Distributed => &self.distributed,
        }
    }

    pub fn pdn_mut(&mut self, design: Design) -> &mut PdnParams {
        match design {
            Design::Clustered => &mut self.clustered,
            Design::Distributed => &mut self.distributed,
        }
    }

    pub fn set_margin(&mut self, margin_mv: f64) {
        self.margin_mv = margin_mv;
        self.clustered.ir_margin = margin_mv;
        self.distributed.ir_margin = margin_mv;
    }

    pub fn validate(&self) -> Result<()> {
        self.clustered.validate()?;
        self.distributed.validate()?;
        self.em.validate()?;
        self.timing.validate()?;
        self.stack.validate()?;
        if !(self.horizon_years >= 0.0 && self.horizon_years.is_finite()) {
            return Err(Error::InvalidParams("horizon_years must be non-negative".into()));
        }
        Ok(())
    }

    /// Text form that [`parse_config`] reads back to an equal config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        put("design", self.design.to_string());
        put("margin_mv", num(self.margin_mv));
        put("horizon_years", num(self.horizon_years));
        put("out", self.out.display().to_string());
        put("seed", self.seed.to_string());
        for w in &self.workloads {
            put("workload", w.display().to_string());
        }
        for (k, v) in stack_entries(&self.stack) {
            put(&format!("stack.{k}"), v);
        }
        for d in Design::ALL {
            for (k, v) in pdn_entries(self.pdn(d)) {
                put(&format!("{d}.pdn.{k}"), v);
            }
        }
        for (k, v) in em_entries(&self.em) {
            put(&format!("em.{k}"), v);
        }
        match (&self.void_model, &self.void_table) {
            (VoidResistanceModel::CalibrationTable(_), Some(path)) => {
                put("em.void_model", "calibration_table".into());
                put("em.void_table", path.display().to_string());
            }
            _ => put("em.void_model", "analytic_blockage".into()),
        }
        for (k, v) in timing_entries(&self.timing) {
            put(&format!("timing.{k}"), v);
        }
        out
    }
}

fn num(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

enum Value {
    F64,
    Usize,
    Bool,
}

impl Value {
    fn expected(&self) -> &'static str {
        match self {
            Value::F64 => "a finite number",
            Value::Usize => "a non-negative integer",
            Value::Bool => "true or false",
        }
    }
}

fn parse_f64(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

macro_rules! fields {
    ($set:ident, $entries:ident, $ty:ty { $($name:ident : $kind:ident),* $(,)? }) => {
        fn $set(target: &mut $ty, key: &str, value: &str) -> Option<std::result::Result<(), &'static str>> {
            match key {
                $(stringify!($name) => Some(fields!(@parse target.$name, $kind, value)),)*
                _ => None,
            }
        }

        fn $entries(src: &$ty) -> Vec<(&'static str, String)> {
            vec![$((stringify!($name), fields!(@show src.$name, $kind)),)*]
        }
    };
    (@parse $place:expr, F64, $v:expr) => {
        parse_f64($v).map(|x| $place = x).ok_or(Value::F64.expected())
    };
    (@parse $place:expr, Usize, $v:expr) => {
        $v.parse::<usize>().map(|x| $place = x).map_err(|_| Value::Usize.expected())
    };
    (@parse $place:expr, Bool, $v:expr) => {
        $v.parse::<bool>().map(|x| $place = x).map_err(|_| Value::Bool.expected())
    };
    (@show $place:expr, F64) => { num($place) };
    (@show $place:expr, Usize) => { $place.to_string() };
    (@show $place:expr, Bool) => { $place.to_string() };
}

fields!(set_pdn, pdn_entries, PdnParams {
    tsv_diameter: F64,
    tsv_pitch: F64,
    rail_width: F64,
    vertical_rail_pitch: F64,
    vertical_rails: Usize,
    horizontal_rails: Usize,
    sheet_resistance: F64,
    tsv_c4_resistance: F64,
    tsv_per_tier: Bool,
    supply_voltage: F64,
    current_per_saa: F64,
    bank_width: F64,
    bank_height: F64,
    tsvs_per_line: Usize,
    rail_conductance_scale: F64,
    package_resistance: F64,
});

fields!(set_em, em_entries, EmParams {
    alpha: F64,
    f: F64,
    omega: F64,
    delta: F64,
    d0: F64,
    ea: F64,
    k: F64,
    temperature: F64,
    z_star: F64,
    e_charge: F64,
    rho_barrier: F64,
    eps_tsv: F64,
    c0: F64,
    dt: F64,
    j_unit: F64,
    tsv_radius: F64,
    initial_radius: F64,
});

fields!(set_timing, timing_entries, DramTiming { t_rc: F64, t_rcd: F64, t_cl: F64 });

fields!(set_stack, stack_entries, StackConfig {
    dram_layers: Usize,
    logic_layers: Usize,
    vaults: Usize,
    banks_per_partition: Usize,
    subarrays_per_bank: Usize,
    tiles_per_subarray: Usize,
    tile_width: F64,
    tile_height: F64,
    rows_per_bank: Usize,
    row_width_bits: Usize,
});

fields!(set_workload, workload_entries, WorkloadProfile {
    active_fraction: F64,
    demanded_parallelism: Usize,
    run_active_time: F64,
    request_rate: F64,
    read_write_energy: F64,
    static_power: F64,
    activation_energy: F64,
});

/// Non-blank, non-comment lines as (line number, key, value).
fn entries(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Syntax { line: i + 1, text: line.to_string() })?;
        out.push((i + 1, k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_in(text, Path::new("."))
}

/// Relative paths in the text are resolved against `base`.
pub fn parse_config_in(text: &str, base: &Path) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut margin = None;
    let mut table_line = 0;
    let mut want_table = false;
    let resolve = |v: &str| {
        let p = PathBuf::from(v);
        if p.is_absolute() || base == Path::new(".") {
            p
        } else {
            base.join(p)
        }
    };
    for (line, key, value) in entries(text)? {
        let mismatch = |expected: &'static str| Error::TypeMismatch {
            line,
            key: key.clone(),
            value: value.clone(),
            expected,
        };
        let unknown = || Error::UnknownKey { line, key: key.clone() };
        let applied = |r: Option<std::result::Result<(), &'static str>>| match r {
            Some(Ok(())) => Ok(()),
            Some(Err(e)) => Err(mismatch(e)),
            None => Err(unknown()),
        };
        match key.as_str() {
            "design" => cfg.design = DesignSelect::parse(&value).ok_or_else(|| mismatch("clustered, distributed or both"))?,
            "margin_mv" => {
                let m = parse_f64(&value).filter(|m| *m > 0.0).ok_or_else(|| mismatch("a positive number"))?;
                margin = Some(m);
            }
            "horizon_years" => {
                cfg.horizon_years =
                    parse_f64(&value).filter(|h| *h >= 0.0).ok_or_else(|| mismatch("a non-negative number"))?
            }
            "out" => cfg.out = PathBuf::from(&value),
            "seed" => cfg.seed = value.parse().map_err(|_| mismatch(Value::Usize.expected()))?,
            "workload" => {
                let path = resolve(&value);
                if !path.is_file() {
                    return Err(Error::MissingWorkloadFile { line, path });
                }
                cfg.workloads.push(path);
            }
            "em.void_model" => match value.as_str() {
                "analytic_blockage" => want_table = false,
                "calibration_table" => {
                    want_table = true;
                    table_line = table_line.max(line);
                }
                _ => return Err(mismatch("analytic_blockage or calibration_table")),
            },
            "em.void_table" => {
                let path = resolve(&value);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::Table(format!("line {line}: {}: {e}", path.display())))?;
                let model = VoidResistanceModel::parse_table(&text)
                    .map_err(|e| Error::Table(format!("line {line}: {e}")))?;
                cfg.void_model = model;
                cfg.void_table = Some(path);
                table_line = line;
            }
            k => {
                if let Some(f) = k.strip_prefix("pdn.") {
                    let r = set_pdn(&mut cfg.clustered, f, &value);
                    applied(r)?;
                    applied(set_pdn(&mut cfg.distributed, f, &value))?;
                } else if let Some(f) = k.strip_prefix("clustered.pdn.") {
                    applied(set_pdn(&mut cfg.clustered, f, &value))?;
                } else if let Some(f) = k.strip_prefix("distributed.pdn.") {
                    applied(set_pdn(&mut cfg.distributed, f, &value))?;
                } else if let Some(f) = k.strip_prefix("em.") {
                    applied(set_em(&mut cfg.em, f, &value))?;
                } else if let Some(f) = k.strip_prefix("timing.") {
                    applied(set_timing(&mut cfg.timing, f, &value))?;
                } else if let Some(f) = k.strip_prefix("stack.") {
                    applied(set_stack(&mut cfg.stack, f, &value))?;
                } else {
                    return Err(unknown());
                }
            }
        }
    }
    match (want_table, cfg.void_table.is_some()) {
        (true, false) => {
            return Err(Error::Table(format!("line {table_line}: calibration_table needs em.void_table")));
        }
        (false, _) => {
            cfg.void_model = VoidResistanceModel::AnalyticBlockage;
            cfg.void_table = None;
        }
        _ => {}
    }
    cfg.set_margin(margin.unwrap_or(cfg.margin_mv));
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_workload(text: &str) -> Result<WorkloadProfile> {
    let mut wl = WorkloadProfile { name: String::new(), ..WorkloadProfile::default() };
    let mut seen_name = false;
    for (line, key, value) in entries(text)? {
        if key == "name" {
            if value.is_empty() {
                return Err(Error::TypeMismatch { line, key, value, expected: "a non-empty name" });
            }
            wl.name = value;
            seen_name = true;
            continue;
        }
        match set_workload(&mut wl, &key, &value) {
            Some(Ok(())) => {}
            Some(Err(expected)) => return Err(Error::TypeMismatch { line, key, value, expected }),
            None => return Err(Error::UnknownKey { line, key }),
        }
    }
    if !seen_name {
        return Err(Error::InvalidParams("workload profile has no `name`".into()));
    }
    wl.validate()?;
    Ok(wl)
}

pub fn workload_to_text(wl: &WorkloadProfile) -> String {
    let mut out = format!("name = {}\n", wl.name);
    for (k, v) in workload_entries(wl) {
        out.push_str(&format!("{k} = {v}\n"));
    }
    out
}

pub fn load_workload(path: &Path) -> Result<WorkloadProfile> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    parse_workload(&text)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    parse_config_in(&text, path.parent().unwrap_or(Path::new(".")))
}
