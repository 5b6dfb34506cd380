//! Cavity-QED figures of merit: Purcell enhancement, emitter-field coupling,
//! cavity decay and the strong-coupling verdict, plus loss and temperature
//! scans built on the ring-down protocol.

use serde::{Deserialize, Serialize};

use crate::analysis::{line_fit, ModeRecord, ModeVolume};
use crate::error::{Error, Result};
use crate::units::{EPS0, HBAR, HC_EV_NM};

const PI: f64 = std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmitterSpec {
    /// Dipole moment, C m.
    pub dipole_moment: f64,
    /// Bulk spontaneous-emission rate, rad/s.
    pub gamma_bulk: f64,
    /// Non-radiative decay rate, rad/s.
    pub gamma_nr: f64,
    /// `(x_offset, z_depth)`, nm.
    pub position: (f64, f64),
    /// Unit vector `(x, z)`.
    pub orientation: (f64, f64),
}

impl EmitterSpec {
    /// InAs/GaAs quantum dot: 1e-28 C m, 2 pi x 1 GHz, 20 nm deep, z-oriented.
    pub fn quantum_dot() -> Self {
        Self {
            dipole_moment: 1e-28,
            gamma_bulk: 2.0 * PI * 1e9,
            gamma_nr: 0.0,
            position: (0.0, 20.0),
            orientation: (0.0, 1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dipole_moment > 0.0) {
            return Err(Error::Domain("dipole moment must be positive".into()));
        }
        if !(self.gamma_bulk > 0.0) {
            return Err(Error::Domain("bulk decay rate must be positive".into()));
        }
        if !(self.gamma_nr >= 0.0) {
            return Err(Error::Domain("non-radiative rate must be nonnegative".into()));
        }
        let norm = self.orientation.0.hypot(self.orientation.1);
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::Domain("orientation must be a unit vector".into()));
        }
        Ok(())
    }

    /// Total emitter decay rate `gamma_bulk + gamma_nr`.
    pub fn gamma(&self) -> f64 {
        self.gamma_bulk + self.gamma_nr
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CqedReport {
    /// `F - 1` for a mode width of 1 um.
    pub purcell_per_um: f64,
    pub purcell_at_width: f64,
    pub assumed_width_y_nm: f64,
    /// Coupling rate with the emitter-site permittivity, rad/s.
    pub g: f64,
    /// Coupling rate with the vacuum permittivity, rad/s.
    pub g_vacuum_eps: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub strong_coupling: bool,
    pub g_over_kappa: f64,
    pub g_over_gamma: f64,
    pub field_fraction: f64,
}

/// `1 + (3 / 4 pi^2) (lambda / n)^3 (Q / V) |E / E_max|^2`.
pub fn purcell_factor(q: f64, v_nm3: f64, wavelength_nm: f64, index: f64, field_fraction: f64) -> Result<f64> {
    if !(v_nm3 > 0.0) {
        return Err(Error::Dependency("mode volume not available".into()));
    }
    if !(0.0..=1.0).contains(&field_fraction) {
        return Err(Error::Domain(format!("field fraction {field_fraction} outside [0, 1]")));
    }
    let l = wavelength_nm / index;
    Ok(1.0 + 3.0 / (4.0 * PI * PI) * l * l * l * q / v_nm3 * field_fraction)
}

/// `g = mu sqrt(omega / (2 eps0 eps_r hbar V)) |E / E_max|`, rad/s.
pub fn coupling_g(omega0: f64, dipole_moment: f64, eps_r: f64, v_nm3: f64, field_amplitude_ratio: f64) -> Result<f64> {
    if !(v_nm3 > 0.0) {
        return Err(Error::Dependency("mode volume not available".into()));
    }
    let v = v_nm3 * 1e-27;
    Ok(dipole_moment * (omega0 / (2.0 * EPS0 * eps_r * HBAR * v)).sqrt() * field_amplitude_ratio)
}

/// Cavity field decay rate `omega / 2Q`.
pub fn kappa(omega0: f64, q_total: f64) -> f64 {
    omega0 / (2.0 * q_total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub strong: bool,
    pub g_over_kappa: f64,
    pub g_over_gamma: f64,
}

pub fn strong_coupling_verdict(g: f64, kappa: f64, gamma: f64) -> Result<Verdict> {
    if !(g >= 0.0 && kappa > 0.0 && gamma > 0.0) {
        return Err(Error::Domain("coupling rates must be positive".into()));
    }
    Ok(Verdict {
        strong: g > kappa && g > gamma,
        g_over_kappa: g / kappa,
        g_over_gamma: g / gamma,
    })
}

/// Figures of merit of `mode` for an emitter seeing `field_fraction`
/// (`eps |E|^2 / max eps_E |E|^2`) in a dielectric of permittivity `eps_d`.
pub fn report(mode: &ModeRecord, volume: &ModeVolume, emitter: &EmitterSpec, field_fraction: f64, eps_d: f64) -> Result<CqedReport> {
    emitter.validate()?;
    let y = volume.assumed_width_y_nm;
    let lambda = HC_EV_NM / mode.omega0_ev;
    let n = eps_d.sqrt();
    let f = purcell_factor(mode.q_total, volume.v_mode_nm3, lambda, n, field_fraction)?;
    let per_um = (f - 1.0) * y / 1000.0;
    let amp = field_fraction.sqrt();
    let g = coupling_g(mode.omega0, emitter.dipole_moment, eps_d, volume.v_mode_nm3, amp)?;
    let g_vac = coupling_g(mode.omega0, emitter.dipole_moment, 1.0, volume.v_mode_nm3, amp)?;
    let k = kappa(mode.omega0, mode.q_total);
    let verdict = strong_coupling_verdict(g, k, emitter.gamma())?;
    Ok(CqedReport {
        purcell_per_um: per_um,
        purcell_at_width: f,
        assumed_width_y_nm: y,
        g,
        g_vacuum_eps: g_vac,
        kappa: k,
        gamma: emitter.gamma(),
        strong_coupling: verdict.strong,
        g_over_kappa: verdict.g_over_kappa,
        g_over_gamma: verdict.g_over_gamma,
        field_fraction,
    })
}

/// One row of a loss or temperature scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRow {
    pub xi: f64,
    pub temperature_k: Option<f64>,
    pub omega0_ev: f64,
    pub q_rad: f64,
    pub q_abs: f64,
    pub q_total: f64,
    pub v_mode_per_width_nm2: f64,
    pub report: CqedReport,
    /// No resonance within half a reference linewidth of the reference mode.
    pub mode_lost: bool,
    pub perturbed: bool,
}

/// Absorption share or radiative/volume drift above which a mode counts as
/// perturbed by the metal loss.
pub const PERTURBED_ABSORPTION_SHARE: f64 = 0.2;
pub const PERTURBED_DRIFT: f64 = 0.01;

/// Perturbation test against the low-loss reference row.
pub fn is_perturbed(row_q_total: f64, row_q_abs: f64, row_q_rad: f64, row_v: f64, reference_q_rad: f64, reference_v: f64) -> bool {
    row_q_total / row_q_abs > PERTURBED_ABSORPTION_SHARE
        || (row_q_rad - reference_q_rad).abs() / reference_q_rad > PERTURBED_DRIFT
        || (row_v - reference_v).abs() / reference_v > PERTURBED_DRIFT
}

/// Log-log slope and R^2 of `q_abs` against `xi` over rows with
/// `xi >= xi_min` that were not lost.
pub fn q_abs_scaling(rows: &[LossRow], xi_min: f64) -> Option<(f64, f64)> {
    let (x, y): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.xi >= xi_min && !r.mode_lost && r.q_abs < crate::analysis::Q_CAP)
        .map(|r| (r.xi.ln(), r.q_abs.ln()))
        .unzip();
    if x.len() < 2 {
        return None;
    }
    let (_, slope, r2) = line_fit(&x, &y);
    Some((slope, r2))
}

pub fn loss_table(rows: &[LossRow]) -> crate::io::CsvTable {
    use crate::io::num;
    let mut t = crate::io::CsvTable::new([
        "xi",
        "temperature_k",
        "q_rad",
        "q_abs",
        "q_total",
        "purcell_per_um",
        "g_ghz",
        "kappa_ghz",
        "strong_coupling",
        "purcell_at_y",
        "mode_lost",
        "perturbed",
    ]);
    for r in rows {
        t.push(vec![
            num(r.xi),
            r.temperature_k.map(num).unwrap_or_default(),
            num(r.q_rad),
            num(r.q_abs),
            num(r.q_total),
            num(r.report.purcell_per_um),
            num(crate::units::omega_to_ghz(r.report.g)),
            num(crate::units::omega_to_ghz(r.report.kappa)),
            r.report.strong_coupling.to_string(),
            num(r.report.purcell_at_width),
            r.mode_lost.to_string(),
            r.perturbed.to_string(),
        ]);
    }
    t
}
