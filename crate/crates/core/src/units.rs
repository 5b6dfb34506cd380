//! Physical constants (SI, CODATA 2018) and unit conversions.

pub const C0: f64 = 299_792_458.0;
pub const EPS0: f64 = 8.854_187_812_8e-12;
pub const MU0: f64 = 1.256_637_062_12e-6;
/// Reduced Planck constant in J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Reduced Planck constant in eV s.
pub const HBAR_EV: f64 = 6.582_119_569e-16;
/// h c in eV nm.
pub const HC_EV_NM: f64 = 1_239.841_984;
pub const NM: f64 = 1e-9;

/// Photon energy in eV to angular frequency in rad/s.
pub fn ev_to_omega(energy_ev: f64) -> f64 {
    energy_ev / HBAR_EV
}

pub fn omega_to_ev(omega: f64) -> f64 {
    omega * HBAR_EV
}

/// Free-space wavelength in nm for a photon energy in eV.
pub fn ev_to_wavelength_nm(energy_ev: f64) -> f64 {
    HC_EV_NM / energy_ev
}

pub fn omega_to_ghz(omega: f64) -> f64 {
    omega / (2.0 * std::f64::consts::PI) / 1e9
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions_round_trip() {
        let w = ev_to_omega(1.2);
        assert!((omega_to_ev(w) - 1.2).abs() < 1e-14);
        // 1.2 eV is 1033.2 nm
        assert!((ev_to_wavelength_nm(1.2) - 1033.2017).abs() < 1e-3);
        // hbar * c consistency
        let hc = 2.0 * std::f64::consts::PI * HBAR_EV * C0 / NM;
        assert!((hc - HC_EV_NM).abs() / HC_EV_NM < 1e-8);
    }
}
