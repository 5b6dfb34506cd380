use serde::{Deserialize, Serialize};

use crate::units::ev_to_omega;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SourceKind {
    ElectricDipoleZ,
    ElectricDipoleX,
    /// A row of `Ex` currents spanning every column (normal-incidence plane
    /// wave on laterally closed grids).
    PlaneWaveX,
}

/// Gaussian-modulated sinusoid driving a point (or line) current.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub kind: SourceKind,
    /// `Ez` node `(i, k)` for z dipoles, `Ex` node for x dipoles; the row
    /// index `k` alone for plane waves.
    pub position: (usize, usize),
    pub center_energy: f64,
    /// Full width at half maximum of the spectral amplitude, eV.
    pub bandwidth_energy: f64,
    /// Peak current density, A/m^2.
    pub amplitude: f64,
    /// Delay of the envelope peak in envelope standard deviations; the
    /// source is treated as off after twice this delay.
    pub delay_sigmas: f64,
}

impl SourceSpec {
    pub fn gaussian(kind: SourceKind, position: (usize, usize), center_energy: f64, bandwidth_energy: f64) -> Self {
        Self {
            kind,
            position,
            center_energy,
            bandwidth_energy,
            amplitude: 1.0,
            delay_sigmas: 5.0,
        }
    }

    pub fn omega(&self) -> f64 {
        ev_to_omega(self.center_energy)
    }

    /// Envelope standard deviation in seconds.
    pub fn sigma_t(&self) -> f64 {
        let fwhm = ev_to_omega(self.bandwidth_energy);
        let sigma_w = fwhm / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt());
        1.0 / sigma_w
    }

    pub fn peak_time(&self) -> f64 {
        self.delay_sigmas * self.sigma_t()
    }

    pub fn turnoff_time(&self) -> f64 {
        2.0 * self.peak_time()
    }

    pub fn value(&self, t: f64) -> f64 {
        if t > self.turnoff_time() || t < 0.0 {
            return 0.0;
        }
        let tau = t - self.peak_time();
        let s = self.sigma_t();
        self.amplitude * (-0.5 * tau * tau / (s * s)).exp() * (self.omega() * tau).sin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_and_turnoff() {
        let s = SourceSpec::gaussian(SourceKind::ElectricDipoleZ, (0, 0), 1.3, 0.013);
        assert_eq!(s.value(s.turnoff_time() * 1.01), 0.0);
        assert!(s.value(s.turnoff_time() * 0.999).abs() < 1e-5);
        // spectral FWHM <-> temporal sigma: sigma_t * sigma_w = 1
        let sigma_w = ev_to_omega(0.013) / 2.354_820_045;
        assert!((s.sigma_t() * sigma_w - 1.0).abs() < 1e-8);
    }
}
