//! Electromigration void growth in TSVs and the void-radius to resistance map.

use crate::error::{Error, Result};

/// SI units throughout.
#[derive(Debug, Clone, PartialEq)]
pub struct EmParams {
    pub alpha: f64,
    pub f: f64,
    /// m³ per atom
    pub omega: f64,
    /// Void interface thickness, m.
    pub delta: f64,
    /// m²/s
    pub d0: f64,
    /// J
    pub ea: f64,
    /// J/K
    pub k: f64,
    /// K
    pub temperature: f64,
    pub z_star: f64,
    /// C
    pub e_charge: f64,
    /// Ω·m
    pub rho_barrier: f64,
    /// m
    pub eps_tsv: f64,
    /// m⁻³
    pub c0: f64,
    /// s
    pub dt: f64,
    /// A/m² per parallel activation
    pub j_unit: f64,
    /// m
    pub tsv_radius: f64,
    /// Void radius at time zero, m.
    pub initial_radius: f64,
}

impl Default for EmParams {
    fn default() -> Self {
        EmParams {
            alpha: 1.0,
            f: 0.4,
            omega: 1.18e-29,
            delta: 5e-9,
            d0: 0.0047,
            ea: 1.30e-19,
            k: 1.38e-23,
            temperature: 453.0,
            z_star: 1.0,
            e_charge: 1.602e-19,
            rho_barrier: 3.00e-6,
            eps_tsv: 1.15e-6,
            c0: 1.53e28,
            dt: 5.0e6,
            j_unit: 3.76e8,
            tsv_radius: 5e-6,
            initial_radius: 0.0,
        }
    }
}

impl EmParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("alpha", self.alpha),
            ("f", self.f),
            ("omega", self.omega),
            ("delta", self.delta),
            ("d0", self.d0),
            ("k", self.k),
            ("temperature", self.temperature),
            ("z_star", self.z_star),
            ("e_charge", self.e_charge),
            ("rho_barrier", self.rho_barrier),
            ("eps_tsv", self.eps_tsv),
            ("c0", self.c0),
            ("dt", self.dt),
            ("j_unit", self.j_unit),
            ("tsv_radius", self.tsv_radius),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!("em.{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.ea >= 0.0 && self.ea.is_finite()) {
            return Err(Error::InvalidParams("em.ea must be non-negative".into()));
        }
        if !(0.0..self.tsv_radius).contains(&self.initial_radius) {
            return Err(Error::InvalidParams("em.initial_radius must lie in [0, tsv_radius)".into()));
        }
        Ok(())
    }

    fn boltzmann_factor(&self) -> f64 {
        (-self.ea / (self.k * self.temperature)).exp()
    }
}

pub fn vacancy_diffusivity(p: &EmParams) -> f64 {
    p.d0 * p.boltzmann_factor()
}

pub fn vacancy_concentration(p: &EmParams) -> f64 {
    p.c0 * p.boltzmann_factor()
}

/// Per-TSV current density with `n` concurrent activations.
pub fn current_density(n_saa: usize, p: &EmParams) -> f64 {
    match n_saa {
        32 => 1.2e10,
        16 => 6.02e9,
        8 => 3.01e9,
        4 => 1.5e9,
        2 => 7.52e8,
        n => p.j_unit * n as f64,
    }
}

pub fn vacancy_flux(p: &EmParams, j: f64) -> f64 {
    vacancy_diffusivity(p) * vacancy_concentration(p) * (p.e_charge * p.z_star / (p.k * p.temperature)) * p.rho_barrier * j
}

/// Radius gained over `effective_dt` at constant current density.
pub fn void_growth(p: &EmParams, j: f64, effective_dt: f64) -> f64 {
    p.alpha * p.f * p.omega * p.eps_tsv * vacancy_flux(p, j).abs() * effective_dt / p.delta
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VoidState {
    pub radius: f64,
    pub elapsed: f64,
}

pub fn step_void_growth(s: VoidState, p: &EmParams, j: f64, effective_dt: f64) -> VoidState {
    VoidState {
        radius: (s.radius + void_growth(p, j, effective_dt)).min(p.tsv_radius),
        elapsed: s.elapsed + effective_dt,
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum VoidResistanceModel {
    /// The void removes conducting cross-section: `R = r0 a² / (a² - r²)`.
    #[default]
    AnalyticBlockage,
    /// (radius m, resistance Ω), strictly increasing in both.
    CalibrationTable(Vec<(f64, f64)>),
}

impl VoidResistanceModel {
    pub fn table(rows: Vec<(f64, f64)>) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::Table(format!("need at least 2 rows, got {}", rows.len())));
        }
        for (i, w) in rows.windows(2).enumerate() {
            if !(w[1].0 > w[0].0 && w[1].1 > w[0].1) {
                return Err(Error::Table(format!("rows {} and {} are not strictly increasing", i + 1, i + 2)));
            }
        }
        if rows.iter().any(|&(r, v)| !(r >= 0.0 && r.is_finite() && v > 0.0 && v.is_finite())) {
            return Err(Error::Table("radii must be non-negative and resistances positive".into()));
        }
        Ok(VoidResistanceModel::CalibrationTable(rows))
    }

    /// Parses `radius_m,resistance_ohm` CSV with a header line.
    pub fn parse_table(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        match lines.next() {
            Some("radius_m,resistance_ohm") => {}
            other => return Err(Error::Table(format!("expected header `radius_m,resistance_ohm`, got {other:?}"))),
        }
        let mut rows = Vec::new();
        for line in lines {
            let mut it = line.split(',').map(str::trim);
            let parse = |v: Option<&str>| v.and_then(|s| s.parse::<f64>().ok());
            match (parse(it.next()), parse(it.next()), it.next()) {
                (Some(r), Some(v), None) => rows.push((r, v)),
                _ => return Err(Error::Table(format!("malformed row `{line}`"))),
            }
        }
        VoidResistanceModel::table(rows)
    }

    pub fn to_csv(&self) -> Option<String> {
        match self {
            VoidResistanceModel::AnalyticBlockage => None,
            VoidResistanceModel::CalibrationTable(rows) => {
                let mut out = String::from("radius_m,resistance_ohm\n");
                for (r, v) in rows {
                    out.push_str(&format!("{r:e},{v:e}\n"));
                }
                Some(out)
            }
        }
    }
}

/// TSV chain resistance for a void of the given radius; `+inf` once the
/// void spans the TSV.
pub fn void_to_resistance(s: &VoidState, model: &VoidResistanceModel, r0: f64, p: &EmParams) -> f64 {
    if s.radius >= p.tsv_radius {
        return f64::INFINITY;
    }
    match model {
        VoidResistanceModel::AnalyticBlockage => {
            let a2 = p.tsv_radius * p.tsv_radius;
            r0 * a2 / (a2 - s.radius * s.radius)
        }
        VoidResistanceModel::CalibrationTable(rows) => interpolate(rows, s.radius),
    }
}

fn interpolate(rows: &[(f64, f64)], x: f64) -> f64 {
    let (first, last) = (rows[0], rows[rows.len() - 1]);
    if x <= first.0 {
        return first.1;
    }
    if x >= last.0 {
        return last.1;
    }
    let k = rows.partition_point(|&(r, _)| r <= x);
    let ((x0, y0), (x1, y1)) = (rows[k - 1], rows[k]);
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_activation_energy_is_identity() {
        let p = EmParams { ea: 0.0, ..EmParams::default() };
        assert_eq!(vacancy_diffusivity(&p), p.d0);
        assert_eq!(vacancy_concentration(&p), p.c0);
    }

    #[test]
    fn hot_limit_approaches_d0() {
        let p = EmParams { temperature: 1e12, ..EmParams::default() };
        assert!((vacancy_diffusivity(&p) / p.d0 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn halved_temperature_doubles_exponent() {
        let p = EmParams::default();
        let cold = EmParams { temperature: p.temperature / 2.0, ..p.clone() };
        let expect = p.c0 * (-2.0 * p.ea / (p.k * p.temperature)).exp();
        assert!((vacancy_concentration(&cold) / expect - 1.0).abs() < 1e-12);
    }

    #[test]
    fn density_table() {
        let p = EmParams::default();
        assert_eq!(current_density(32, &p), 1.2e10);
        assert_eq!(current_density(2, &p), 7.52e8);
        assert_eq!(current_density(0, &p), 0.0);
        assert_eq!(current_density(1, &p), 3.76e8);
        for n in [2, 4, 8, 16, 32] {
            let per = current_density(n, &p) / n as f64;
            assert!((per / p.j_unit - 1.0).abs() <= 3e-3, "{n}: {per}");
        }
    }

    #[test]
    fn flux_is_linear() {
        let p = EmParams::default();
        assert_eq!(vacancy_flux(&p, 0.0), 0.0);
        assert_eq!(vacancy_flux(&p, 2.4e10), 2.0 * vacancy_flux(&p, 1.2e10));
    }

    #[test]
    fn growth_saturates_at_tsv_radius() {
        let p = EmParams::default();
        let s = step_void_growth(VoidState { radius: 4.99e-6, elapsed: 0.0 }, &p, 1.2e10, 1e9);
        assert_eq!(s.radius, p.tsv_radius);
        let still = step_void_growth(VoidState::default(), &p, 0.0, p.dt);
        assert_eq!(still.radius, 0.0);
        assert_eq!(still.elapsed, p.dt);
    }

    #[test]
    fn half_steps_match_full_step() {
        let p = EmParams::default();
        let full = step_void_growth(VoidState::default(), &p, 1.2e10, p.dt);
        let half = step_void_growth(step_void_growth(VoidState::default(), &p, 1.2e10, p.dt / 2.0), &p, 1.2e10, p.dt / 2.0);
        assert_eq!(full, half);
    }

    #[test]
    fn analytic_blockage_values() {
        let p = EmParams::default();
        let m = VoidResistanceModel::AnalyticBlockage;
        assert_eq!(void_to_resistance(&VoidState::default(), &m, 0.25, &p), 0.25);
        let r = p.tsv_radius / 2f64.sqrt();
        let v = void_to_resistance(&VoidState { radius: r, elapsed: 0.0 }, &m, 0.25, &p);
        assert!((v - 0.5).abs() < 1e-12);
        assert!(void_to_resistance(&VoidState { radius: p.tsv_radius, elapsed: 0.0 }, &m, 0.25, &p).is_infinite());
    }

    #[test]
    fn table_interpolation_and_clamping() {
        let p = EmParams::default();
        let m = VoidResistanceModel::table(vec![(0.0, 0.25), (2.5e-6, 0.30)]).unwrap();
        let at = |r: f64| void_to_resistance(&VoidState { radius: r, elapsed: 0.0 }, &m, 0.25, &p);
        assert!((at(1.25e-6) - 0.275).abs() < 1e-15);
        assert_eq!(at(4e-6), 0.30);
        assert!(VoidResistanceModel::table(vec![(0.0, 0.25)]).is_err());
        assert!(VoidResistanceModel::table(vec![(0.0, 0.25), (1e-6, 0.25)]).is_err());
    }

    #[test]
    fn table_csv_round_trip() {
        let m = VoidResistanceModel::table(vec![(0.0, 0.25), (2.5e-6, 0.30), (4e-6, 0.9)]).unwrap();
        let again = VoidResistanceModel::parse_table(&m.to_csv().unwrap()).unwrap();
        assert_eq!(m, again);
        assert!(VoidResistanceModel::parse_table("r,R\n0,1\n1,2\n").is_err());
    }
}
