//! Drude metal model, surface-plasmon dispersion and the loss-factor map.
//!
//! Frequency-domain quantities use the `exp(-i w t)` time convention, so
//! `permittivity_at` returns `eps_inf - wp^2 / (w^2 + i eta w)` and a lossy
//! metal has `Im(eps) >= 0`. This is the exact transform of the current
//! equation `dJ/dt + eta J = eps0 wp^2 E` integrated by the FDTD engine.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{ev_to_omega, C0, HBAR_EV, NM};

/// Free-electron metal: `eps_inf`, plasma energy and a room-temperature
/// damping energy divided by the loss factor `xi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrudeMaterial {
    pub eps_inf: f64,
    /// hbar * wp in eV.
    pub plasma_energy: f64,
    /// hbar * eta at room temperature in eV.
    pub damping_energy_room: f64,
    /// xi >= 1; effective damping is `damping_energy_room / loss_factor`.
    pub loss_factor: f64,
}

impl DrudeMaterial {
    pub fn new(
        eps_inf: f64,
        plasma_energy: f64,
        damping_energy_room: f64,
        loss_factor: f64,
    ) -> Result<Self> {
        let m = Self {
            eps_inf,
            plasma_energy,
            damping_energy_room,
            loss_factor,
        };
        m.validate()?;
        Ok(m)
    }

    /// Silver as used for the cavity: eps_inf = 1, hbar wp = 8.8 eV and a
    /// room-temperature damping of 0.05 eV, cooled by `xi = 2000` to
    /// hbar eta = 2.5e-5 eV.
    pub fn silver() -> Self {
        Self {
            eps_inf: 1.0,
            plasma_energy: 8.8,
            damping_energy_room: 0.05,
            loss_factor: 2000.0,
        }
    }

    /// Same material with the damping switched off.
    pub fn lossless(self) -> Self {
        Self {
            damping_energy_room: 0.0,
            ..self
        }
    }

    pub fn with_loss_factor(self, loss_factor: f64) -> Self {
        Self {
            loss_factor,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.plasma_energy > 0.0) {
            return Err(Error::Domain(format!(
                "plasma energy must be positive, got {}",
                self.plasma_energy
            )));
        }
        if !(self.damping_energy_room >= 0.0) {
            return Err(Error::Domain(format!(
                "damping energy must be nonnegative, got {}",
                self.damping_energy_room
            )));
        }
        if !(self.loss_factor >= 1.0) {
            return Err(Error::Domain(format!(
                "loss factor must be >= 1, got {}",
                self.loss_factor
            )));
        }
        if !(self.eps_inf >= 1.0) {
            return Err(Error::Domain(format!(
                "eps_inf must be >= 1, got {}",
                self.eps_inf
            )));
        }
        Ok(())
    }

    /// Effective damping energy in eV.
    pub fn damping_energy(&self) -> f64 {
        if self.loss_factor.is_infinite() {
            0.0
        } else {
            self.damping_energy_room / self.loss_factor
        }
    }

    /// Plasma angular frequency in rad/s.
    pub fn plasma_omega(&self) -> f64 {
        ev_to_omega(self.plasma_energy)
    }

    /// Damping rate eta in 1/s.
    pub fn damping_rate(&self) -> f64 {
        self.damping_energy() / HBAR_EV
    }

    /// Complex relative permittivity at angular frequency `omega`.
    pub fn permittivity_at(&self, omega: f64) -> Result<Complex64> {
        if !(omega > 0.0) {
            return Err(Error::Domain(format!(
                "angular frequency must be positive, got {omega}"
            )));
        }
        let wp = self.plasma_omega();
        let eta = self.damping_rate();
        let denom = Complex64::new(omega * omega, eta * omega);
        Ok(Complex64::new(self.eps_inf, 0.0) - wp * wp / denom)
    }

    /// Dispersive energy weight `d(w eps)/dw = eps_inf + (wp/w)^2` of the
    /// lossless metal.
    pub fn energy_weight(&self, omega: f64) -> f64 {
        let r = self.plasma_omega() / omega;
        self.eps_inf + r * r
    }
}

/// Lossless, nondispersive dielectric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dielectric {
    pub permittivity: f64,
}

impl Dielectric {
    pub fn new(permittivity: f64) -> Result<Self> {
        if !(permittivity >= 1.0) {
            return Err(Error::Domain(format!(
                "dielectric permittivity must be >= 1, got {permittivity}"
            )));
        }
        Ok(Self { permittivity })
    }

    pub fn gaas() -> Self {
        Self {
            permittivity: 12.25,
        }
    }

    pub fn air() -> Self {
        Self { permittivity: 1.0 }
    }

    pub fn index(&self) -> f64 {
        self.permittivity.sqrt()
    }
}

/// Relative threshold on `|eps_m + eps_d|` below which the dispersion
/// relation is treated as sitting on the surface-plasmon pole.
pub const POLE_TOLERANCE: f64 = 1e-9;

/// Surface-plasmon wavevector `k_sp = (w/c) sqrt(eps_d eps_m / (eps_d + eps_m))`
/// in 1/m. The principal square root is taken, so the real part is
/// nonnegative.
pub fn sp_wavevector(metal: &DrudeMaterial, diel: &Dielectric, omega: f64) -> Result<Complex64> {
    let eps_m = metal.permittivity_at(omega)?;
    sp_wavevector_from_eps(eps_m, diel.permittivity, omega)
}

pub(crate) fn sp_wavevector_from_eps(eps_m: Complex64, eps_d: f64, omega: f64) -> Result<Complex64> {
    let sum = eps_m + eps_d;
    if sum.norm() <= POLE_TOLERANCE * eps_m.norm().max(eps_d) {
        return Err(Error::Pole(sum.re));
    }
    let ratio = eps_m * eps_d / sum;
    Ok(ratio.sqrt() * (omega / C0))
}

/// Effective index `Re(k_sp) c / w` of the bound surface plasmon.
pub fn sp_effective_index(metal: &DrudeMaterial, diel: &Dielectric, omega: f64) -> Result<f64> {
    Ok(sp_wavevector(metal, diel, omega)?.re * C0 / omega)
}

/// Grating period in nm that places the Bragg condition `k_sp a = pi` at
/// `target_energy` (eV).
pub fn design_grating_period(
    metal: &DrudeMaterial,
    diel: &Dielectric,
    target_energy: f64,
) -> Result<f64> {
    let omega = ev_to_omega(target_energy);
    let eps_m = metal.permittivity_at(omega)?;
    if eps_m.re >= -diel.permittivity {
        return Err(Error::Design(format!(
            "no bound surface plasmon at {target_energy} eV: Re(eps_m) = {:.4} >= -eps_d = {:.4}",
            eps_m.re, -diel.permittivity
        )));
    }
    let k = sp_wavevector_from_eps(eps_m, diel.permittivity, omega)?;
    Ok(std::f64::consts::PI / k.re / NM)
}

/// Photon energy (eV) at which the Bragg condition `Re(k_sp) a = pi` holds
/// for a grating of period `period_nm`; inverse of [`design_grating_period`].
pub fn bragg_energy(metal: &DrudeMaterial, diel: &Dielectric, period_nm: f64) -> Result<f64> {
    if !(period_nm > 0.0) {
        return Err(Error::Domain(format!("period {period_nm} nm must be positive")));
    }
    // Re(k_sp) grows monotonically up to the surface-plasmon resonance
    let e_sp = crate::units::omega_to_ev(metal.plasma_omega() / (metal.eps_inf + diel.permittivity).sqrt());
    let residual = |e: f64| design_grating_period(metal, diel, e).map(|a| a - period_nm);
    let (mut lo, mut hi) = (1e-3 * e_sp, e_sp * (1.0 - 1e-6));
    let (r_lo, r_hi) = (residual(lo)?, residual(hi)?);
    if r_lo.signum() == r_hi.signum() {
        return Err(Error::Design(format!("no Bragg energy below the plasmon resonance for a = {period_nm} nm")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if residual(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Decay length of `|E|^2` into the dielectric for a bound plasmon with
/// in-plane wavevector `k_parallel` (1/m); returns nm.
pub fn evanescent_intensity_decay_nm(k_parallel: f64, diel: &Dielectric, omega: f64) -> Option<f64> {
    let k0 = omega / C0;
    let kappa2 = k_parallel * k_parallel - k0 * k0 * diel.permittivity;
    (kappa2 > 0.0).then(|| 1.0 / (2.0 * kappa2.sqrt()) / NM)
}

/// Temperature assigned to `xi = 1`.
pub const ROOM_TEMPERATURE_K: f64 = 295.0;
/// Lowest tabulated temperature, where the residual resistivity saturates.
pub const RESIDUAL_TEMPERATURE_K: f64 = 4.2;
/// Residual resistivity ratio of silver used for the temperature map.
pub const SILVER_RRR: f64 = 1467.0;

/// Monotone map between the loss factor and the sample temperature,
/// interpolated linearly in `(ln T, ln xi)` between anchors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XiTemperatureTable {
    /// `(temperature_k, xi)` pairs, temperature strictly decreasing and xi
    /// strictly increasing.
    anchors: Vec<(f64, f64)>,
}

impl XiTemperatureTable {
    /// `{295 K -> 1, 40 K -> 25, 4.2 K -> rrr}`.
    pub fn with_rrr(rrr: f64) -> Result<Self> {
        Self::from_pairs(vec![
            (ROOM_TEMPERATURE_K, 1.0),
            (40.0, 25.0),
            (RESIDUAL_TEMPERATURE_K, rrr),
        ])
    }

    /// Builds a table from `(K, xi)` pairs in any order.
    pub fn from_pairs(mut anchors: Vec<(f64, f64)>) -> Result<Self> {
        if anchors.len() < 2 {
            return Err(Error::Domain(
                "temperature table needs at least two anchors".into(),
            ));
        }
        anchors.sort_by(|a, b| b.0.total_cmp(&a.0));
        for w in anchors.windows(2) {
            let (t0, x0) = w[0];
            let (t1, x1) = w[1];
            if !(t1 < t0) || !(x1 > x0) {
                return Err(Error::Domain(format!(
                    "temperature table must be strictly monotone: ({t0} K, {x0}) then ({t1} K, {x1})"
                )));
            }
        }
        if anchors.iter().any(|&(t, x)| !(t > 0.0) || !(x >= 1.0)) {
            return Err(Error::Domain(
                "temperature table needs T > 0 and xi >= 1".into(),
            ));
        }
        Ok(Self { anchors })
    }

    pub fn anchors(&self) -> &[(f64, f64)] {
        &self.anchors
    }

    /// Largest tabulated xi (the residual-resistivity limit).
    pub fn xi_max(&self) -> f64 {
        self.anchors.last().map(|a| a.1).unwrap_or(1.0)
    }

    pub fn xi_min(&self) -> f64 {
        self.anchors[0].1
    }

    pub fn to_temperature(&self, xi: f64) -> Result<f64> {
        let rrr = self.xi_max();
        if xi > rrr {
            return Err(Error::Saturation { xi, rrr });
        }
        if !(xi >= self.xi_min()) {
            return Err(Error::Domain(format!(
                "loss factor {xi} below table minimum {}",
                self.xi_min()
            )));
        }
        let lx = xi.ln();
        for w in self.anchors.windows(2) {
            let (t0, x0) = w[0];
            let (t1, x1) = w[1];
            if xi <= x1 {
                let s = (lx - x0.ln()) / (x1.ln() - x0.ln());
                return Ok((t0.ln() + s * (t1.ln() - t0.ln())).exp());
            }
        }
        Ok(self.anchors.last().unwrap().0)
    }

    /// Inverse map. Temperatures below the lowest anchor saturate at the
    /// residual-resistivity limit.
    pub fn to_loss_factor(&self, temperature_k: f64) -> Result<f64> {
        let t_max = self.anchors[0].0;
        if !(temperature_k > 0.0) || temperature_k > t_max {
            return Err(Error::Domain(format!(
                "temperature {temperature_k} K outside (0, {t_max}] K"
            )));
        }
        let lt = temperature_k.ln();
        for w in self.anchors.windows(2) {
            let (t0, x0) = w[0];
            let (t1, x1) = w[1];
            if temperature_k >= t1 {
                let s = (lt - t0.ln()) / (t1.ln() - t0.ln());
                return Ok((x0.ln() + s * (x1.ln() - x0.ln())).exp());
            }
        }
        Ok(self.xi_max())
    }
}

/// Temperature for loss factor `xi` with the default silver anchors and the
/// given residual resistivity ratio.
pub fn loss_factor_to_temperature(xi: f64, rrr: f64) -> Result<f64> {
    XiTemperatureTable::with_rrr(rrr)?.to_temperature(xi)
}

pub fn temperature_to_loss_factor(temperature_k: f64, rrr: f64) -> Result<f64> {
    XiTemperatureTable::with_rrr(rrr)?.to_loss_factor(temperature_k)
}
