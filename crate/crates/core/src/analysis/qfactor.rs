//! Quality factors from the energy balance of a ring-down record.

use serde::{Deserialize, Serialize};

use super::fit::line_fit;
use super::resonance::Q_CAP;
use crate::error::{Error, Result};
use crate::fdtd::TimeSeries;

/// Radiated power split by direction, as fractions of the total outward flux.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FluxSplit {
    pub down: f64,
    pub up: f64,
    pub lateral: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BalanceFlag {
    /// Net outward flux at or below the noise floor.
    NegativeFlux,
    QRadAboveCap,
    QAbsAboveCap,
}

/// Monitor series feeding the energy balance. Flux series are outward power
/// through the bottom (into the substrate), top (into air) and the two
/// lateral sides of the box enclosing the energy region.
#[derive(Debug, Clone, Copy)]
pub struct BalanceSeries<'a> {
    pub energy: &'a TimeSeries,
    pub absorbed: &'a TimeSeries,
    pub flux_down: &'a TimeSeries,
    pub flux_up: &'a TimeSeries,
    pub flux_left: &'a TimeSeries,
    pub flux_right: &'a TimeSeries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyBalance {
    /// From the decay rate of the stored energy.
    pub q_total: f64,
    pub q_rad: f64,
    pub q_abs: f64,
    /// Window-averaged stored energy (J/m).
    pub energy_u: f64,
    /// Window-averaged radiated and absorbed power (W/m).
    pub p_rad: f64,
    pub p_abs: f64,
    pub flux_split: FluxSplit,
    pub flags: Vec<BalanceFlag>,
}

impl EnergyBalance {
    /// Relative violation of `1/q_total = 1/q_rad + 1/q_abs`.
    pub fn closure_error(&self) -> f64 {
        let parallel = 1.0 / self.q_rad + 1.0 / self.q_abs;
        (1.0 / self.q_total - parallel).abs() * self.q_total
    }
}

fn window(s: &TimeSeries, t0: f64, t1: f64) -> (Vec<f64>, Vec<f64>) {
    s.samples
        .iter()
        .filter(|p| p.time >= t0 && p.time <= t1)
        .map(|p| (p.time, p.value))
        .unzip()
}

/// Trapezoidal time average.
fn mean(t: &[f64], v: &[f64]) -> f64 {
    if t.len() < 2 {
        return v.first().copied().unwrap_or(0.0);
    }
    let mut acc = 0.0;
    for j in 1..t.len() {
        acc += 0.5 * (v[j] + v[j - 1]) * (t[j] - t[j - 1]);
    }
    acc / (t[t.len() - 1] - t[0])
}

/// Mean of the samples recorded before `t_source` (the source onset).
fn noise_floor(s: &TimeSeries, t_source: f64) -> f64 {
    let pre: Vec<f64> = s.samples.iter().filter(|p| p.time < t_source).map(|p| p.value).collect();
    if pre.is_empty() {
        0.0
    } else {
        pre.iter().sum::<f64>() / pre.len() as f64
    }
}

fn capped(q: f64) -> (f64, bool) {
    if !q.is_finite() || q <= 0.0 || q > Q_CAP {
        (Q_CAP, true)
    } else {
        (q, false)
    }
}

/// Q factors over the window `[t0, t1]` (seconds, source off), with noise
/// floors estimated from samples before `t_source`.
pub fn q_from_energy_balance(
    series: BalanceSeries<'_>,
    omega0: f64,
    t_source: f64,
    t0: f64,
    t1: f64,
) -> Result<EnergyBalance> {
    let (t, u) = window(series.energy, t0, t1);
    if t.len() < 4 {
        return Err(Error::Extraction("energy balance window holds fewer than 4 samples".into()));
    }
    let peak = series.energy.samples.iter().map(|p| p.value).fold(0.0, f64::max);
    let energy_u = mean(&t, &u);
    if !(energy_u > 1e-12 * peak) || u.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Extraction("stored energy below the noise floor in the analysis window".into()));
    }
    let avg = |s: &TimeSeries| {
        let (ts, vs) = window(s, t0, t1);
        mean(&ts, &vs) - noise_floor(s, t_source)
    };
    let down = avg(series.flux_down);
    let up = avg(series.flux_up);
    let lateral = avg(series.flux_left) + avg(series.flux_right);
    let p_rad = down + up + lateral;
    let p_abs = avg(series.absorbed).max(0.0);

    let mut flags = Vec::new();
    let (q_rad, rad_cap) = capped(omega0 * energy_u / p_rad);
    if p_rad <= 0.0 {
        flags.push(BalanceFlag::NegativeFlux);
    } else if rad_cap {
        flags.push(BalanceFlag::QRadAboveCap);
    }
    let (q_abs, abs_cap) = capped(omega0 * energy_u / p_abs);
    if abs_cap {
        flags.push(BalanceFlag::QAbsAboveCap);
    }

    let ln_u: Vec<f64> = u.iter().map(|v| v.ln()).collect();
    let (_, slope, _) = line_fit(&t, &ln_u);
    let (q_total, _) = capped(-omega0 / slope);

    let flux_split = if p_rad > 0.0 {
        FluxSplit {
            down: down / p_rad,
            up: up / p_rad,
            lateral: lateral / p_rad,
        }
    } else {
        FluxSplit::default()
    };
    Ok(EnergyBalance {
        q_total,
        q_rad,
        q_abs,
        energy_u,
        p_rad,
        p_abs,
        flux_split,
        flags,
    })
}
