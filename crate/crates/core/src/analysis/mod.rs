//! Resonance identification and characterization: frequencies, quality
//! factors, mode volume and field-structure fits.

mod fit;
mod mode;
mod qfactor;
mod resonance;

use serde::{Deserialize, Serialize};

pub use fit::{levenberg_marquardt, line_fit, linear_lsq, solve};
pub use mode::{
    count_peaks, energy_weight, peak_indices, field_at_ez_node, field_fraction, fit_decay, fit_z_decay, mode_volume,
    standing_wave_profile, LineCut, ModeVolume, DECAY_MIN_POINTS, DECAY_MIN_R2, DECAY_WINDOW_NM,
};
pub use qfactor::{q_from_energy_balance, BalanceFlag, BalanceSeries, EnergyBalance, FluxSplit};
pub use resonance::{
    find_resonances, windowed_spectrum, Resonance, ResonanceFlag, ResonanceOptions, MIN_PERIODS, Q_CAP,
    Q_METHOD_TOLERANCE,
};

/// Serialized summary of one extracted cavity mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeRecord {
    pub omega0: f64,
    pub omega0_ev: f64,
    pub omega0_over_omega_p: f64,
    pub cavity_length_nm: f64,
    pub q_total: f64,
    pub q_rad: f64,
    pub q_abs: f64,
    /// Q of the ring-down probe fit.
    pub q_ringdown: f64,
    pub energy_u: f64,
    pub p_rad: f64,
    pub p_abs: f64,
    pub flux_split: FluxSplit,
    /// Share of the stored energy inside the cavity box, for the sensitivity
    /// of Q to the integration domain.
    pub cavity_energy_fraction: f64,
    pub v_mode_per_width_nm2: f64,
    pub decay_z_nm: Option<f64>,
    pub peak_count: usize,
    pub symmetry_rms: f64,
    pub flags: Vec<String>,
}

impl ModeRecord {
    /// Relative violation of `1/q_total = 1/q_rad + 1/q_abs`.
    pub fn closure_error(&self) -> f64 {
        (1.0 / self.q_total - 1.0 / self.q_rad - 1.0 / self.q_abs).abs() * self.q_total
    }

    /// Relative gap between the ring-down Q and the parallel combination of
    /// the energy-balance Q_rad and Q_abs.
    pub fn method_gap(&self) -> f64 {
        let q = self.q_parallel();
        (self.q_ringdown - q).abs() / q
    }

    pub fn q_parallel(&self) -> f64 {
        1.0 / (1.0 / self.q_rad + 1.0 / self.q_abs)
    }
}
