//! Closed-form bank throughput, latency, power and energy-delay product.

use crate::aging::{AgingTimeline, WorkloadProfile, SECONDS_PER_YEAR};
use crate::error::{Error, Result};

/// Utilisation cap on the queueing term.
pub const RHO_CAP: f64 = 0.999;

/// Nanoseconds.
#[derive(Debug, Clone, PartialEq)]
pub struct DramTiming {
    pub t_rc: f64,
    pub t_rcd: f64,
    pub t_cl: f64,
}

impl Default for DramTiming {
    fn default() -> Self {
        DramTiming { t_rc: 48.0, t_rcd: 13.0, t_cl: 13.0 }
    }
}

impl DramTiming {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("t_rc", self.t_rc), ("t_rcd", self.t_rcd), ("t_cl", self.t_cl)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!("timing.{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerfEstimate {
    /// accesses/s
    pub throughput: f64,
    /// s
    pub avg_latency: f64,
    /// W
    pub power: f64,
    /// J·s; `+inf` when nothing is served.
    pub edp: f64,
}

pub fn estimate_performance(wl: &WorkloadProfile, napsaa: usize, timing: &DramTiming) -> Result<PerfEstimate> {
    if napsaa == 0 {
        return Err(Error::ZeroNapsaa);
    }
    let capacity = napsaa as f64 / (timing.t_rc * 1e-9);
    let throughput = wl.request_rate.min(capacity);
    let rho = (wl.request_rate / capacity).min(RHO_CAP);
    let avg_latency = (timing.t_rcd + timing.t_cl) * 1e-9 + rho / (2.0 * capacity * (1.0 - rho));
    let power = wl.static_power + wl.activation_energy * throughput + wl.read_write_energy * throughput;
    let edp = if throughput > 0.0 { power / throughput * avg_latency } else { f64::INFINITY };
    Ok(PerfEstimate { throughput, avg_latency, power, edp })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdpPoint {
    pub t_years: f64,
    pub edp: f64,
}

pub fn edp_over_lifetime(timeline: &AgingTimeline, wl: &WorkloadProfile, timing: &DramTiming) -> Result<Vec<EdpPoint>> {
    timeline
        .events
        .iter()
        .map(|e| {
            let edp = match e.napsaa {
                0 => f64::INFINITY,
                n => estimate_performance(wl, n, timing)?.edp,
            };
            Ok(EdpPoint { t_years: e.t / SECONDS_PER_YEAR, edp })
        })
        .collect()
}

pub fn normalize_edp(series: &[EdpPoint], baseline_edp_at_zero: f64) -> Result<Vec<EdpPoint>> {
    if !(baseline_edp_at_zero > 0.0 && baseline_edp_at_zero.is_finite()) {
        return Err(Error::NonPositiveBaseline(baseline_edp_at_zero));
    }
    Ok(series.iter().map(|p| EdpPoint { t_years: p.t_years, edp: p.edp / baseline_edp_at_zero }).collect())
}

/// `t_years,edp_js,edp_normalized`
pub fn edp_csv(raw: &[EdpPoint], normalized: &[EdpPoint]) -> String {
    let mut out = String::from("t_years,edp_js,edp_normalized\n");
    for (r, n) in raw.iter().zip(normalized) {
        out.push_str(&format!("{:.2},{:.5e},{:.5e}\n", r.t_years, r.edp, n.edp));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn idle_workload_has_infinite_edp() {
        let wl = WorkloadProfile { request_rate: 0.0, ..WorkloadProfile::default() };
        let p = estimate_performance(&wl, 4, &DramTiming::default()).unwrap();
        assert_eq!(p.throughput, 0.0);
        assert!((p.avg_latency - 26e-9).abs() < 1e-21);
        assert!(p.edp.is_infinite());
    }

    #[test]
    fn saturation_clamps_throughput() {
        let t = DramTiming::default();
        let capacity = 4.0 / 48e-9;
        let wl = WorkloadProfile { request_rate: 2.0 * capacity, ..WorkloadProfile::default() };
        assert_eq!(estimate_performance(&wl, 4, &t).unwrap().throughput, capacity);
    }

    #[test]
    fn more_parallelism_cuts_latency() {
        let t = DramTiming::default();
        let wl = WorkloadProfile { request_rate: 5e7, ..WorkloadProfile::default() };
        let a = estimate_performance(&wl, 4, &t).unwrap();
        let b = estimate_performance(&wl, 32, &t).unwrap();
        assert_eq!(a.throughput, b.throughput);
        assert!(b.avg_latency < a.avg_latency);
    }

    #[test]
    fn zero_napsaa_rejected() {
        assert!(matches!(
            estimate_performance(&WorkloadProfile::default(), 0, &DramTiming::default()),
            Err(Error::ZeroNapsaa)
        ));
    }

    #[test]
    fn normalization() {
        let s = [EdpPoint { t_years: 0.0, edp: 4.0 }, EdpPoint { t_years: 1.0, edp: 8.0 }];
        let own = normalize_edp(&s, s[0].edp).unwrap();
        assert_eq!(own[0].edp, 1.0);
        let half = normalize_edp(&s, 8.0).unwrap();
        assert_eq!(half[1].edp, 1.0);
        assert!(normalize_edp(&s, 0.0).is_err());
    }
}
