//! Mode volume, field fractions, decay fits and line cuts on a frequency-domain
//! snapshot.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fit::line_fit;
use crate::error::{Error, Result};
use crate::fdtd::{Media, Snapshot};
use crate::geometry::{CellKind, MaterialGrid};

/// Window below the interface used by [`fit_z_decay`], nm.
pub const DECAY_WINDOW_NM: (f64, f64) = (10.0, 120.0);
pub const DECAY_MIN_POINTS: usize = 15;
pub const DECAY_MIN_R2: f64 = 0.98;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeVolume {
    pub v_mode_per_width_nm2: f64,
    pub assumed_width_y_nm: f64,
    pub v_mode_nm3: f64,
    /// Cell `(i, k)` of the energy-density maximum.
    pub max_location: (usize, usize),
    /// Maximum of `eps_E |E|^2` (snapshot units).
    pub max_density: f64,
}

impl ModeVolume {
    pub fn with_width(&self, y_nm: f64) -> ModeVolume {
        ModeVolume {
            assumed_width_y_nm: y_nm,
            v_mode_nm3: self.v_mode_per_width_nm2 * y_nm,
            ..self.clone()
        }
    }
}

/// Energy weight of a cell at angular frequency `omega`.
pub fn energy_weight(media: &Media, kind: CellKind, omega: f64) -> f64 {
    match kind {
        CellKind::Metal => media.metal.energy_weight(omega),
        CellKind::Dielectric => media.dielectric.permittivity,
        CellKind::Air => 1.0,
    }
}

fn check_dims(snapshot: &Snapshot, grid: &MaterialGrid) -> Result<()> {
    if snapshot.nx != grid.nx || snapshot.nz != grid.nz {
        return Err(Error::Dependency(format!(
            "snapshot {}x{} does not match grid {}x{}",
            snapshot.nx, snapshot.nz, grid.nx, grid.nz
        )));
    }
    Ok(())
}

/// `sum(eps_E |E|^2) dx^2 / max(eps_E |E|^2)` over the non-PML cells.
pub fn mode_volume(snapshot: &Snapshot, grid: &MaterialGrid, media: &Media, assumed_width_y_nm: f64) -> Result<ModeVolume> {
    check_dims(snapshot, grid)?;
    if !(assumed_width_y_nm > 0.0) {
        return Err(Error::Domain(format!("assumed width {assumed_width_y_nm} nm must be positive")));
    }
    let intensity = snapshot.intensity();
    let phys = grid.physical_region();
    let mut total = 0.0;
    let mut best = (0.0, (phys.i0, phys.k0));
    let mut pml_max = 0.0f64;
    for i in 0..grid.nx {
        for k in 0..grid.nz {
            let w = energy_weight(media, grid.kind(i, k), snapshot.omega) * intensity[i * grid.nz + k];
            if phys.contains(i, k) {
                total += w;
                if w > best.0 {
                    best = (w, (i, k));
                }
            } else {
                pml_max = pml_max.max(w);
            }
        }
    }
    if !(best.0 > 0.0) {
        return Err(Error::Extraction("snapshot carries no field".into()));
    }
    if pml_max > best.0 * (1.0 + 1e-12) {
        return Err(Error::IntegrationDomain(
            "energy-density maximum lies inside the PML".into(),
        ));
    }
    let per_width = total / best.0 * grid.dx * grid.dx;
    Ok(ModeVolume {
        v_mode_per_width_nm2: per_width,
        assumed_width_y_nm,
        v_mode_nm3: per_width * assumed_width_y_nm,
        max_location: best.1,
        max_density: best.0,
    })
}

/// Complex `(Ex, Ez)` interpolated to the `Ez` node `(i, k)`.
pub fn field_at_ez_node(snapshot: &Snapshot, i: usize, k: usize) -> (Complex64, Complex64) {
    let nz = snapshot.nz;
    let ex = |a: usize, b: usize| snapshot.ex[a * nz + b];
    let ex_avg = 0.25 * (ex(i - 1, k) + ex(i, k) + ex(i - 1, k + 1) + ex(i, k + 1));
    (ex_avg, snapshot.ez[i * nz + k])
}

/// `eps(r) |E(r)|^2 / max(eps_E |E|^2)` at an emitter sitting on `Ez` node
/// `(i, k)` in the dielectric, clamped to `[0, 1]`.
pub fn field_fraction(snapshot: &Snapshot, grid: &MaterialGrid, media: &Media, volume: &ModeVolume, node: (usize, usize)) -> Result<f64> {
    check_dims(snapshot, grid)?;
    let (i, k) = node;
    if i == 0 || i >= grid.nx || k + 1 >= grid.nz {
        return Err(Error::Placement(format!("node ({i}, {k}) lies on the grid edge")));
    }
    if grid.kind(i, k) == CellKind::Metal || grid.kind(i - 1, k) == CellKind::Metal {
        return Err(Error::Domain(format!("emitter node ({i}, {k}) lies in metal")));
    }
    let (ex, ez) = field_at_ez_node(snapshot, i, k);
    let eps = energy_weight(media, grid.kind(i, k), snapshot.omega);
    Ok((eps * (ex.norm_sqr() + ez.norm_sqr()) / volume.max_density).clamp(0.0, 1.0))
}

/// Least-squares decay length `1/|slope|` of `ln(intensity)` against depth,
/// with the fit quality gate.
pub fn fit_decay(depth_nm: &[f64], intensity: &[f64]) -> Result<f64> {
    if depth_nm.len() < DECAY_MIN_POINTS {
        return Err(Error::Extraction(format!(
            "{} samples in the decay window, need {DECAY_MIN_POINTS}",
            depth_nm.len()
        )));
    }
    if intensity.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::FitQuality { r_squared: 0.0 });
    }
    let ln: Vec<f64> = intensity.iter().map(|v| v.ln()).collect();
    let (_, slope, r2) = line_fit(depth_nm, &ln);
    if !(r2 >= DECAY_MIN_R2) || slope == 0.0 {
        return Err(Error::FitQuality { r_squared: if r2.is_finite() { r2 } else { 0.0 } });
    }
    Ok(1.0 / slope.abs())
}

/// Decay constant of `|E|^2` into the dielectric along cell column `i`.
pub fn fit_z_decay(snapshot: &Snapshot, grid: &MaterialGrid, i: usize) -> Result<f64> {
    check_dims(snapshot, grid)?;
    let intensity = snapshot.intensity();
    let (mut z, mut v) = (Vec::new(), Vec::new());
    for k in 0..grid.interface_k {
        let depth = (grid.interface_k as f64 - k as f64 - 0.5) * grid.dx;
        if depth >= DECAY_WINDOW_NM.0 && depth <= DECAY_WINDOW_NM.1 && grid.kind(i, k) == CellKind::Dielectric {
            z.push(depth);
            v.push(intensity[i * grid.nz + k]);
        }
    }
    fit_decay(&z, &v)
}

/// Horizontal line cut of a snapshot at a fixed depth below the interface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineCut {
    pub depth_nm: f64,
    pub x_nm: Vec<f64>,
    pub e2: Vec<f64>,
    pub ex2: Vec<f64>,
    pub ez2: Vec<f64>,
    /// Intensity peaks between the innermost grooves.
    pub peak_count: usize,
    /// RMS mirror asymmetry of `e2` about the cavity centre, relative to its
    /// maximum, over the cavity.
    pub symmetry_rms: f64,
}

impl LineCut {
    pub fn to_csv(&self) -> crate::io::CsvTable {
        let mut t = crate::io::CsvTable::new(["x_nm", "e2", "ex2", "ez2"]);
        for j in 0..self.x_nm.len() {
            t.push(vec![
                crate::io::num(self.x_nm[j]),
                crate::io::num(self.e2[j]),
                crate::io::num(self.ex2[j]),
                crate::io::num(self.ez2[j]),
            ]);
        }
        t
    }
}

/// Number of peaks whose topographic prominence exceeds `min_prominence`
/// times the maximum of `values`.
pub fn count_peaks(values: &[f64], min_prominence: f64) -> usize {
    peak_indices(values, min_prominence).len()
}

/// Indices of the peaks counted by [`count_peaks`].
pub fn peak_indices(values: &[f64], min_prominence: f64) -> Vec<usize> {
    let max = values.iter().copied().fold(0.0, f64::max);
    if !(max > 0.0) {
        return Vec::new();
    }
    let n = values.len();
    let mut peaks = Vec::new();
    for j in 0..n {
        let v = values[j];
        let left_ok = j == 0 || values[j - 1] < v;
        let right_ok = j + 1 == n || values[j + 1] <= v;
        if !(left_ok && right_ok) {
            continue;
        }
        // lowest point reached before meeting higher ground on each side
        let mut lmin = v;
        let mut l = j;
        let mut higher_left = false;
        while l > 0 {
            l -= 1;
            if values[l] > v {
                higher_left = true;
                break;
            }
            lmin = lmin.min(values[l]);
        }
        let mut rmin = v;
        let mut r = j;
        let mut higher_right = false;
        while r + 1 < n {
            r += 1;
            if values[r] > v {
                higher_right = true;
                break;
            }
            rmin = rmin.min(values[r]);
        }
        let base = match (higher_left, higher_right) {
            (true, true) => lmin.max(rmin),
            (true, false) => lmin,
            (false, true) => rmin,
            (false, false) => 0.0,
        };
        if v - base >= min_prominence * max {
            peaks.push(j);
        }
    }
    peaks
}

/// Line cut at `z_depth` nm below the interface across the physical domain.
pub fn standing_wave_profile(snapshot: &Snapshot, grid: &MaterialGrid, z_depth: f64) -> Result<LineCut> {
    check_dims(snapshot, grid)?;
    let row = grid.interface_k as f64 - z_depth / grid.dx - 0.5;
    let k = row.round().clamp(0.0, grid.interface_k as f64 - 1.0) as usize;
    let phys = grid.physical_region();
    let mut cut = LineCut {
        depth_nm: (grid.interface_k as f64 - k as f64 - 0.5) * grid.dx,
        x_nm: Vec::new(),
        e2: Vec::new(),
        ex2: Vec::new(),
        ez2: Vec::new(),
        peak_count: 0,
        symmetry_rms: 0.0,
    };
    for i in phys.i0..phys.i1 {
        let (ex, ez) = snapshot.cell_field(i, k);
        cut.x_nm.push(grid.x_of_boundary(i) + 0.5 * grid.dx);
        cut.ex2.push(ex.norm_sqr());
        cut.ez2.push(ez.norm_sqr());
        cut.e2.push(ex.norm_sqr() + ez.norm_sqr());
    }
    let (c0, c1) = grid.cavity_span();
    if c1 > c0 {
        let span: Vec<f64> = (c0..c1).map(|i| cut.e2[i - phys.i0]).collect();
        cut.peak_count = count_peaks(&span, 0.2);
        let max = span.iter().copied().fold(0.0, f64::max);
        if max > 0.0 {
            let n = span.len();
            let ss: f64 = (0..n).map(|j| ((span[j] - span[n - 1 - j]) / max).powi(2)).sum();
            cut.symmetry_rms = (ss / n as f64).sqrt();
        }
    }
    Ok(cut)
}
