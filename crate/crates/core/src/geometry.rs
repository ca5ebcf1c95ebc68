//! Bank geometry and TSV placement for the two PDN designs.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Design {
    Clustered,
    Distributed,
}

impl Design {
    pub const ALL: [Design; 2] = [Design::Clustered, Design::Distributed];

    pub fn name(self) -> &'static str {
        match self {
            Design::Clustered => "clustered",
            Design::Distributed => "distributed",
        }
    }
}

impl fmt::Display for Design {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Design {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "clustered" => Ok(Design::Clustered),
            "distributed" => Ok(Design::Distributed),
            other => Err(format!("unknown design `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarity {
    P,
    G,
}

impl Polarity {
    pub fn symbol(self) -> char {
        match self {
            Polarity::P => 'P',
            Polarity::G => 'G',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StackConfig {
    pub dram_layers: usize,
    pub logic_layers: usize,
    pub vaults: usize,
    pub banks_per_partition: usize,
    pub subarrays_per_bank: usize,
    pub tiles_per_subarray: usize,
    /// µm
    pub tile_width: f64,
    /// µm
    pub tile_height: f64,
    pub rows_per_bank: usize,
    pub row_width_bits: usize,
}

impl Default for StackConfig {
    fn default() -> Self {
        StackConfig {
            dram_layers: 4,
            logic_layers: 1,
            vaults: 4,
            banks_per_partition: 2,
            subarrays_per_bank: 32,
            tiles_per_subarray: 16,
            tile_width: 29.0,
            tile_height: 41.3,
            rows_per_bank: 16384,
            row_width_bits: 8192,
        }
    }
}

impl StackConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("dram_layers", self.dram_layers),
            ("logic_layers", self.logic_layers),
            ("vaults", self.vaults),
            ("banks_per_partition", self.banks_per_partition),
            ("subarrays_per_bank", self.subarrays_per_bank),
            ("tiles_per_subarray", self.tiles_per_subarray),
            ("rows_per_bank", self.rows_per_bank),
            ("row_width_bits", self.row_width_bits),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::InvalidParams(format!("stack.{name} must be at least 1")));
            }
        }
        if self.rows_per_bank != self.subarrays_per_bank * 512 {
            return Err(Error::InvalidParams(format!(
                "stack.rows_per_bank ({}) must equal 512 x subarrays_per_bank ({})",
                self.rows_per_bank, self.subarrays_per_bank
            )));
        }
        if !(self.tile_width > 0.0 && self.tile_height > 0.0) {
            return Err(Error::InvalidParams("tile dimensions must be positive".into()));
        }
        Ok(())
    }
}

/// Electrical and geometric PDN parameters for one design. Lengths in µm.
#[derive(Debug, Clone, PartialEq)]
pub struct PdnParams {
    pub tsv_diameter: f64,
    /// Same-polarity TSV pitch along a line.
    pub tsv_pitch: f64,
    pub rail_width: f64,
    pub vertical_rail_pitch: f64,
    pub vertical_rails: usize,
    pub horizontal_rails: usize,
    /// Ω/square
    pub sheet_resistance: f64,
    /// Ω, one full TSV column including its C4 bump.
    pub tsv_c4_resistance: f64,
    /// Treat `tsv_c4_resistance` as the resistance of each tier segment instead.
    pub tsv_per_tier: bool,
    /// V
    pub supply_voltage: f64,
    /// mV
    pub ir_margin: f64,
    /// mA
    pub current_per_saa: f64,
    pub bank_width: f64,
    pub bank_height: f64,
    /// TSV slots on one mixed P/G line; single-polarity lines hold half.
    pub tsvs_per_line: usize,
    /// Multiplier on rail conductance, standing in for the parallel metal
    /// layers collapsed into one grid per tier.
    pub rail_conductance_scale: f64,
    /// Ω between each ideal supply terminal and its bump plane.
    pub package_resistance: f64,
}

impl PdnParams {
    pub fn clustered() -> Self {
        PdnParams {
            tsv_diameter: 10.0,
            tsv_pitch: 21.0,
            rail_width: 2.0,
            vertical_rail_pitch: 7.0,
            vertical_rails: 96,
            horizontal_rails: 128,
            sheet_resistance: 0.9,
            tsv_c4_resistance: 0.25,
            tsv_per_tier: false,
            supply_voltage: 1.5,
            ir_margin: 75.0,
            current_per_saa: 100.0,
            bank_width: 672.0,
            bank_height: 928.0,
            tsvs_per_line: 64,
            rail_conductance_scale: 20.0,
            package_resistance: 0.003,
        }
    }

    pub fn distributed() -> Self {
        PdnParams {
            tsv_pitch: 96.0,
            vertical_rail_pitch: 8.0,
            bank_width: 768.0,
            bank_height: 1056.0,
            tsvs_per_line: 16,
            rail_conductance_scale: 120.0,
            ..PdnParams::clustered()
        }
    }

    pub fn canonical(design: Design) -> Self {
        match design {
            Design::Clustered => PdnParams::clustered(),
            Design::Distributed => PdnParams::distributed(),
        }
    }

    /// Load current of one subarray activation in amperes.
    pub fn saa_current(&self) -> f64 {
        self.current_per_saa * 1e-3
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tsv_diameter", self.tsv_diameter),
            ("tsv_pitch", self.tsv_pitch),
            ("rail_width", self.rail_width),
            ("vertical_rail_pitch", self.vertical_rail_pitch),
            ("sheet_resistance", self.sheet_resistance),
            ("tsv_c4_resistance", self.tsv_c4_resistance),
            ("supply_voltage", self.supply_voltage),
            ("ir_margin", self.ir_margin),
            ("current_per_saa", self.current_per_saa),
            ("bank_width", self.bank_width),
            ("bank_height", self.bank_height),
            ("rail_conductance_scale", self.rail_conductance_scale),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!("pdn.{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.package_resistance >= 0.0 && self.package_resistance.is_finite()) {
            return Err(Error::InvalidParams("pdn.package_resistance must be non-negative".into()));
        }
        if self.vertical_rails < 2 || self.horizontal_rails < 2 {
            return Err(Error::InvalidParams("rail grid needs at least 2 rails each way".into()));
        }
        if self.tsv_pitch < self.tsv_diameter {
            return Err(Error::InvalidParams(format!(
                "tsv_pitch {} is smaller than tsv_diameter {}",
                self.tsv_pitch, self.tsv_diameter
            )));
        }
        if self.ir_margin >= self.supply_voltage * 1000.0 {
            return Err(Error::InvalidParams("ir_margin must be below the supply voltage".into()));
        }
        if self.tsvs_per_line < 2 || self.tsvs_per_line % 2 != 0 {
            return Err(Error::InvalidParams(format!(
                "tsvs_per_line must be a positive even count, got {}",
                self.tsvs_per_line
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TsvSite {
    pub x: f64,
    pub y: f64,
    pub polarity: Polarity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub y_min: f64,
    pub y_max: f64,
    pub subarrays: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdnLayout {
    pub design: Design,
    pub bank_width: f64,
    pub bank_height: f64,
    pub tsv_sites: Vec<TsvSite>,
    /// Ordered top to bottom.
    pub sections: Vec<Section>,
    /// Index `id - 1`; subarray 1 sits at the top of the bank.
    pub subarray_centers: Vec<(f64, f64)>,
}

impl PdnLayout {
    pub fn subarray_count(&self) -> usize {
        self.subarray_centers.len()
    }

    pub fn subarray_center(&self, id: u32) -> Option<(f64, f64)> {
        (id as usize).checked_sub(1).and_then(|i| self.subarray_centers.get(i)).copied()
    }

    pub fn area(&self) -> f64 {
        self.bank_width * self.bank_height
    }

    pub fn count(&self, polarity: Polarity) -> usize {
        self.tsv_sites.iter().filter(|s| s.polarity == polarity).count()
    }

    /// Index of the section holding `id`.
    pub fn section_of(&self, id: u32) -> Option<usize> {
        self.sections.iter().position(|s| s.subarrays.contains(&id))
    }

    pub fn nearest_tsv_distance(&self, id: u32, polarity: Polarity) -> Option<f64> {
        let (cx, cy) = self.subarray_center(id)?;
        self.tsv_sites
            .iter()
            .filter(|s| s.polarity == polarity)
            .map(|s| (s.x - cx).hypot(s.y - cy))
            .min_by(f64::total_cmp)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x_um,y_um,polarity\n");
        for s in &self.tsv_sites {
            out.push_str(&format!("{:.3},{:.3},{}\n", s.x, s.y, s.polarity.symbol()));
        }
        out
    }
}

pub fn build_layout(design: Design, params: &PdnParams, stack: &StackConfig) -> Result<PdnLayout> {
    match design {
        Design::Clustered => build_clustered_layout(params, stack),
        Design::Distributed => build_distributed_layout(params, stack),
    }
}

fn check_line(params: &PdnParams) -> Result<f64> {
    let per_polarity = params.tsvs_per_line / 2;
    if per_polarity as f64 * params.tsv_pitch > params.bank_width + 1e-9 {
        return Err(Error::InvalidParams(format!(
            "{} TSVs per polarity at {} µm pitch exceed the {} µm bank width",
            per_polarity, params.tsv_pitch, params.bank_width
        )));
    }
    let spacing = params.bank_width / params.tsvs_per_line as f64;
    if spacing < params.tsv_diameter {
        return Err(Error::InvalidParams(format!(
            "{} TSVs on a {} µm line overlap ({spacing:.3} µm spacing < {} µm diameter)",
            params.tsvs_per_line, params.bank_width, params.tsv_diameter
        )));
    }
    if params.vertical_rails as f64 * params.vertical_rail_pitch > params.bank_width + 1e-9 {
        return Err(Error::InvalidParams(format!(
            "{} vertical rails at {} µm pitch do not fit the {} µm bank width",
            params.vertical_rails, params.vertical_rail_pitch, params.bank_width
        )));
    }
    Ok(spacing)
}

/// Slots alternate P, G from the left edge; `keep` filters single-polarity lines.
fn push_line(sites: &mut Vec<TsvSite>, params: &PdnParams, spacing: f64, y: f64, keep: Option<Polarity>) {
    for k in 0..params.tsvs_per_line {
        let polarity = if k % 2 == 0 { Polarity::P } else { Polarity::G };
        if keep.is_some_and(|p| p != polarity) {
            continue;
        }
        sites.push(TsvSite { x: (k as f64 + 0.5) * spacing, y, polarity });
    }
}

fn subarray_centers(params: &PdnParams, stack: &StackConfig) -> Vec<(f64, f64)> {
    let n = stack.subarrays_per_bank;
    let pitch = params.bank_height / n as f64;
    (0..n)
        .map(|i| (params.bank_width / 2.0, params.bank_height - (i as f64 + 0.5) * pitch))
        .collect()
}

pub fn build_clustered_layout(params: &PdnParams, stack: &StackConfig) -> Result<PdnLayout> {
    params.validate()?;
    stack.validate()?;
    let spacing = check_line(params)?;
    let mut tsv_sites = Vec::with_capacity(2 * params.tsvs_per_line);
    push_line(&mut tsv_sites, params, spacing, params.bank_height, None);
    push_line(&mut tsv_sites, params, spacing, 0.0, None);
    let sections = vec![Section {
        y_min: 0.0,
        y_max: params.bank_height,
        subarrays: (1..=stack.subarrays_per_bank as u32).collect(),
    }];
    Ok(PdnLayout {
        design: Design::Clustered,
        bank_width: params.bank_width,
        bank_height: params.bank_height,
        tsv_sites,
        sections,
        subarray_centers: subarray_centers(params, stack),
    })
}

pub const SUBARRAYS_PER_SECTION: usize = 4;

pub fn build_distributed_layout(params: &PdnParams, stack: &StackConfig) -> Result<PdnLayout> {
    params.validate()?;
    stack.validate()?;
    let spacing = check_line(params)?;
    if stack.subarrays_per_bank % SUBARRAYS_PER_SECTION != 0 {
        return Err(Error::InvalidParams(format!(
            "{} subarrays do not split into sections of {SUBARRAYS_PER_SECTION}",
            stack.subarrays_per_bank
        )));
    }
    let n_sections = stack.subarrays_per_bank / SUBARRAYS_PER_SECTION;
    let h = params.bank_height / n_sections as f64;
    let mut tsv_sites = Vec::new();
    for line in 0..=n_sections {
        let y = params.bank_height - line as f64 * h;
        let keep = match line {
            0 => Some(Polarity::P),
            l if l == n_sections => Some(Polarity::G),
            _ => None,
        };
        push_line(&mut tsv_sites, params, spacing, y, keep);
    }
    let sections = (0..n_sections)
        .map(|s| {
            let first = (s * SUBARRAYS_PER_SECTION) as u32 + 1;
            Section {
                y_min: params.bank_height - (s + 1) as f64 * h,
                y_max: params.bank_height - s as f64 * h,
                subarrays: (first..first + SUBARRAYS_PER_SECTION as u32).collect(),
            }
        })
        .collect();
    Ok(PdnLayout {
        design: Design::Distributed,
        bank_width: params.bank_width,
        bank_height: params.bank_height,
        tsv_sites,
        sections,
        subarray_centers: subarray_centers(params, stack),
    })
}
