//! Resonance identification from a real time series.
//!
//! Peaks of the Hann-windowed spectrum seed a joint time-domain fit of
//! decaying sinusoids (variable projection: amplitudes are solved linearly,
//! frequencies and decay rates by Levenberg-Marquardt). Each mode is then
//! re-estimated independently from the unwindowed spectrum with the exact
//! transform of a truncated exponential, and flagged when the two Q values
//! disagree.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::fit::{levenberg_marquardt, linear_lsq};
use crate::error::{Error, Result};
use crate::units::{ev_to_omega, omega_to_ev};

/// Quality factors above this are reported as the cap and flagged.
pub const Q_CAP: f64 = 1e6;
/// Relative disagreement between fit and spectral Q that raises a flag.
pub const Q_METHOD_TOLERANCE: f64 = 0.10;
/// Minimum record length in optical periods of the band centre.
pub const MIN_PERIODS: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResonanceFlag {
    QAboveCap,
    Unresolved,
    MethodDisagreement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    /// Angular frequency, rad/s.
    pub omega: f64,
    /// Field amplitude decay rate (1/s): `|E| ~ exp(-decay_rate t)`.
    pub decay_rate: f64,
    pub q: f64,
    pub q_spectral: Option<f64>,
    pub amplitude: f64,
    pub flags: Vec<ResonanceFlag>,
}

impl Resonance {
    pub fn energy_ev(&self) -> f64 {
        omega_to_ev(self.omega)
    }

    pub fn is_flagged(&self) -> bool {
        !self.flags.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonanceOptions {
    /// Reporting band in eV.
    pub band_ev: (f64, f64),
    /// Spectral peaks below this fraction of the strongest peak are ignored.
    pub peak_threshold: f64,
    pub max_modes: usize,
}

impl ResonanceOptions {
    pub fn band(lo_ev: f64, hi_ev: f64) -> Self {
        Self {
            band_ev: (lo_ev, hi_ev),
            peak_threshold: 0.05,
            max_modes: 8,
        }
    }
}

fn q_of(omega: f64, gamma: f64) -> (f64, bool) {
    if gamma <= omega / (2.0 * Q_CAP) {
        (Q_CAP, true)
    } else {
        (omega / (2.0 * gamma), false)
    }
}

/// Hann-windowed, zero-padded magnitude spectrum: `(omega, |S|)` pairs for
/// nonnegative frequencies.
pub fn windowed_spectrum(samples: &[f64], dt: f64, pad: usize) -> Vec<(f64, f64)> {
    let n = samples.len();
    if n < 2 {
        return Vec::new();
    }
    let m = (n.next_power_of_two() * pad.max(1)).max(2);
    let mean = samples.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex64> = samples
        .iter()
        .enumerate()
        .map(|(j, v)| {
            let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * j as f64 / (n - 1) as f64).cos();
            Complex64::new((v - mean) * w, 0.0)
        })
        .collect();
    buf.resize(m, Complex64::default());
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    (0..m / 2)
        .map(|j| (2.0 * std::f64::consts::PI * j as f64 / (m as f64 * dt), buf[j].norm()))
        .collect()
}

/// Locates the resonances of `samples` (uniform spacing `dt`, seconds) in the
/// options' band.
pub fn find_resonances(samples: &[f64], dt: f64, opts: &ResonanceOptions) -> Result<Vec<Resonance>> {
    let n = samples.len();
    let duration = n as f64 * dt;
    let (lo, hi) = (ev_to_omega(opts.band_ev.0), ev_to_omega(opts.band_ev.1));
    if !(hi > lo) || lo <= 0.0 {
        return Err(Error::Extraction(format!("invalid band {:?} eV", opts.band_ev)));
    }
    let period = 2.0 * std::f64::consts::PI / (0.5 * (lo + hi));
    if duration < MIN_PERIODS * period {
        return Err(Error::Extraction(format!(
            "record of {:.1} periods is shorter than the required {MIN_PERIODS}",
            duration / period
        )));
    }
    let pad = 8;
    let spec = windowed_spectrum(samples, dt, pad);
    let padded = n.next_power_of_two() * pad;
    let neighbourhood = (2.0 * padded as f64 / n as f64).ceil() as usize;
    let nyquist = std::f64::consts::PI / dt;
    let global_max = spec.iter().skip(1).map(|s| s.1).fold(0.0, f64::max);
    if global_max == 0.0 {
        return Ok(Vec::new());
    }
    let mut peaks: Vec<(f64, f64)> = Vec::new();
    for j in 1..spec.len().saturating_sub(1) {
        let v = spec[j].1;
        if v < opts.peak_threshold * global_max || spec[j].0 > 0.95 * nyquist {
            continue;
        }
        let a = j.saturating_sub(neighbourhood);
        let b = (j + neighbourhood + 1).min(spec.len());
        if spec[a..b].iter().any(|s| s.1 > v) {
            continue;
        }
        // parabolic refinement on log magnitude
        let (l, c, r) = (spec[j - 1].1.ln(), v.ln(), spec[j + 1].1.ln());
        let denom = l - 2.0 * c + r;
        let shift = if denom.abs() > 0.0 { 0.5 * (l - r) / denom } else { 0.0 };
        let dw = spec[1].0 - spec[0].0;
        peaks.push((spec[j].0 + shift.clamp(-0.5, 0.5) * dw, v));
    }
    if peaks.is_empty() {
        return Ok(Vec::new());
    }
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1));
    peaks.truncate(opts.max_modes);
    peaks.sort_by(|a, b| a.0.total_cmp(&b.0));

    let t: Vec<f64> = (0..n).map(|j| j as f64 / n as f64).collect();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let y: Vec<f64> = samples.iter().map(|v| v - mean).collect();
    let scale_y = y.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    let y: Vec<f64> = y.iter().map(|v| v / scale_y).collect();

    let design = |theta: &[f64]| -> Vec<Vec<f64>> {
        let mut cols = Vec::with_capacity(theta.len() + 1);
        for m in theta.chunks(2) {
            let (w, g) = (m[0], m[1]);
            let (mut c, mut s) = (Vec::with_capacity(n), Vec::with_capacity(n));
            for &tt in &t {
                let e = (-g * tt).exp();
                let (sn, cs) = (w * tt).sin_cos();
                c.push(e * cs);
                s.push(e * sn);
            }
            cols.push(c);
            cols.push(s);
        }
        cols.push(vec![1.0; n]);
        cols
    };
    let theta0: Vec<f64> = peaks.iter().flat_map(|&(w, _)| [w * duration, 1.0]).collect();
    let steps: Vec<f64> = theta0.iter().map(|v| 1e-7 * v.abs().max(1.0)).collect();
    let (theta, _) = levenberg_marquardt(theta0, &steps, 200, |th| {
        linear_lsq(&design(th), &y).map(|(_, r)| r)
    });
    let (coef, _) = linear_lsq(&design(&theta), &y)
        .ok_or_else(|| Error::Extraction("singular resonance fit".into()))?;

    let mut modes: Vec<Resonance> = theta
        .chunks(2)
        .zip(coef.chunks(2))
        .map(|(m, c)| {
            let omega = m[0] / duration;
            let gamma = m[1] / duration;
            let (q, capped) = q_of(omega, gamma);
            Resonance {
                omega,
                decay_rate: gamma,
                q,
                q_spectral: None,
                amplitude: (c[0] * c[0] + c[1] * c[1]).sqrt() * scale_y,
                flags: if capped { vec![ResonanceFlag::QAboveCap] } else { Vec::new() },
            }
        })
        .collect();

    // unresolved pairs
    let resolution = 2.0 * std::f64::consts::PI / duration;
    for a in 0..modes.len() {
        for b in a + 1..modes.len() {
            let sep = (modes[a].omega - modes[b].omega).abs();
            let width = (modes[a].decay_rate + modes[b].decay_rate).max(resolution);
            if sep < width {
                for idx in [a, b] {
                    if !modes[idx].flags.contains(&ResonanceFlag::Unresolved) {
                        modes[idx].flags.push(ResonanceFlag::Unresolved);
                    }
                }
            }
        }
    }

    let spectral = spectral_q(samples, dt, &modes);
    for (m, qs) in modes.iter_mut().zip(spectral) {
        m.q_spectral = qs;
        if let Some(qs) = qs {
            let both_capped = qs >= Q_CAP && m.q >= Q_CAP;
            if !both_capped && (qs - m.q).abs() > Q_METHOD_TOLERANCE * m.q {
                m.flags.push(ResonanceFlag::MethodDisagreement);
            }
        }
    }
    modes.retain(|m| m.omega >= lo && m.omega <= hi && m.amplitude > 0.0);
    Ok(modes)
}

/// Exact DFT of a sampled truncated exponential `exp((-g + i w) t_j)`,
/// `t_j = j dt`, `j < n`, evaluated at angular frequency `omega`.
fn truncated_exp_dft(w: f64, g: f64, omega: f64, dt: f64, n: usize) -> Complex64 {
    let z = Complex64::new(-g * dt, (omega - w) * dt).exp();
    let one = Complex64::new(1.0, 0.0);
    if (one - z).norm() < 1e-14 {
        return Complex64::new(n as f64 * dt, 0.0);
    }
    (one - z.powf(n as f64)) / (one - z) * dt
}

/// Per-mode Q from a fit of the unwindowed spectrum near each peak, other
/// modes held at their time-domain parameters.
fn spectral_q(samples: &[f64], dt: f64, modes: &[Resonance]) -> Vec<Option<f64>> {
    let n = samples.len();
    let duration = n as f64 * dt;
    let mean = samples.iter().sum::<f64>() / n as f64;
    modes
        .iter()
        .enumerate()
        .map(|(mi, m)| {
            let half = (6.0 * m.decay_rate.abs()).max(6.0 * 2.0 * std::f64::consts::PI / duration);
            let freqs: Vec<f64> = (0..81).map(|j| m.omega - half + 2.0 * half * j as f64 / 80.0).collect();
            let data: Vec<Complex64> = freqs
                .iter()
                .map(|&w| {
                    let step = Complex64::from_polar(1.0, w * dt);
                    let mut ph = Complex64::new(1.0, 0.0);
                    let mut acc = Complex64::default();
                    for v in samples {
                        acc += ph * (v - mean);
                        ph *= step;
                    }
                    acc * dt
                })
                .collect();
            let norm = data.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt().max(1e-300);
            let y: Vec<f64> = data.iter().map(|c| c.re / norm).chain(data.iter().map(|c| c.im / norm)).collect();
            let columns = |w0: f64, g0: f64| -> Vec<Vec<f64>> {
                let mut cols = Vec::new();
                for (li, other) in modes.iter().enumerate() {
                    let (w, g) = if li == mi { (w0, g0) } else { (other.omega, other.decay_rate) };
                    for sign in [1.0, -1.0] {
                        let gvals: Vec<Complex64> = freqs.iter().map(|&f| truncated_exp_dft(sign * w, g, f, dt, n)).collect();
                        cols.push(gvals.iter().map(|c| c.re).chain(gvals.iter().map(|c| c.im)).collect());
                        cols.push(gvals.iter().map(|c| -c.im).chain(gvals.iter().map(|c| c.re)).collect());
                    }
                }
                cols
            };
            let theta0 = vec![m.omega * duration, m.decay_rate * duration];
            let steps = vec![1e-7 * theta0[0].abs().max(1.0), 1e-7 * theta0[1].abs().max(1.0)];
            let (theta, cost) = levenberg_marquardt(theta0, &steps, 100, |th| {
                linear_lsq(&columns(th[0] / duration, th[1] / duration), &y).map(|(_, r)| r)
            });
            if !cost.is_finite() {
                return None;
            }
            Some(q_of(theta[0] / duration, theta[1] / duration).0)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synth(modes: &[(f64, f64, f64)], periods: f64, samples_per_period: f64) -> (Vec<f64>, f64) {
        let w0 = modes[0].0;
        let dt = 2.0 * std::f64::consts::PI / w0 / samples_per_period;
        let n = (periods * samples_per_period) as usize;
        let s = (0..n)
            .map(|j| {
                let t = j as f64 * dt;
                modes
                    .iter()
                    .map(|&(w, q, a)| a * (-w / (2.0 * q) * t).exp() * (w * t + 0.3).cos())
                    .sum()
            })
            .collect();
        (s, dt)
    }

    #[test]
    fn recovers_single_damped_mode() {
        let w0 = ev_to_omega(1.3);
        let (s, dt) = synth(&[(w0, 1000.0, 1.0)], 300.0, 17.0);
        let modes = find_resonances(&s, dt, &ResonanceOptions::band(1.1, 1.5)).unwrap();
        assert_eq!(modes.len(), 1);
        let m = &modes[0];
        assert!((m.omega / w0 - 1.0).abs() < 1e-3);
        assert!((m.q / 1000.0 - 1.0).abs() < 0.02, "q = {}", m.q);
        assert!(!m.is_flagged(), "{:?}", m.flags);
    }

    #[test]
    fn pure_tone_is_capped_and_flagged() {
        let w0 = ev_to_omega(1.3);
        let (s, dt) = synth(&[(w0, 1e15, 1.0)], 100.0, 17.0);
        let modes = find_resonances(&s, dt, &ResonanceOptions::band(1.1, 1.5)).unwrap();
        assert_eq!(modes.len(), 1);
        assert!(modes[0].q >= Q_CAP);
        assert!(modes[0].flags.contains(&ResonanceFlag::QAboveCap));
    }

    #[test]
    fn two_tones_ten_linewidths_apart() {
        let w0 = ev_to_omega(1.3);
        let q = 1000.0;
        let w1 = w0 * (1.0 + 10.0 / q);
        let (s, dt) = synth(&[(w0, q, 1.0), (w1, q, 0.7)], 400.0, 17.0);
        let modes = find_resonances(&s, dt, &ResonanceOptions::band(1.1, 1.5)).unwrap();
        assert_eq!(modes.len(), 2, "{modes:?}");
        assert!((modes[0].omega / w0 - 1.0).abs() < 5e-3);
        assert!((modes[1].omega / w1 - 1.0).abs() < 5e-3);
        for m in &modes {
            assert!((m.q / q - 1.0).abs() < 5e-3, "q = {}", m.q);
        }
    }

    #[test]
    fn empty_band_and_short_record() {
        let w0 = ev_to_omega(1.3);
        let (s, dt) = synth(&[(w0, 1000.0, 1.0)], 100.0, 17.0);
        assert!(find_resonances(&s, dt, &ResonanceOptions::band(0.5, 0.9)).unwrap().is_empty());
        assert!(find_resonances(&s[..200], dt, &ResonanceOptions::band(1.1, 1.5)).is_err());
        assert!(find_resonances(&vec![0.0; 2000], dt, &ResonanceOptions::band(1.1, 1.5)).unwrap().is_empty());
    }
}
