//! Two-dimensional TM (Ex, Ez, Hy) FDTD engine with Drude metals.
//!
//! Yee layout on the cell grid of [`MaterialGrid`]: `Hy(i, k)` at the cell
//! centre `((i+1/2) dx, (k+1/2) dx)`, `Ex(i, k)` at `((i+1/2) dx, k dx)` on
//! the bottom edge and `Ez(i, k)` at `(i dx, (k+1/2) dx)` on the left edge.
//! Each E node takes the mean background permittivity of its two adjacent
//! cells and carries a Drude current weighted by the metal fraction of those
//! cells (0, 1/2 or 1), which is exact for the tangential component at a
//! grid-aligned interface.
//!
//! Time stepping is leapfrog with `H` and `J` on half steps:
//!
//! ```text
//! H^{n+1/2} = H^{n-1/2} - dt/mu0 curl E^n
//! J^{n+1/2} = kj J^{n-1/2} + bj f E^n            (dJ/dt + eta J = eps0 f wp^2 E)
//! E^{n+1}   = E^n + dt/(eps0 eps) (curl H^{n+1/2} - J^{n+1/2} - J_src)
//! ```
//!
//! with `kj = (1 - eta dt/2) / (1 + eta dt/2)`, which is exactly lossless for
//! `eta = 0`. The outer wall is a perfect conductor behind the PML.

mod monitor;
mod pml;
mod source;

pub use monitor::{
    Component, MonitorKind, MonitorRecords, MonitorSpec, Sample, Side, Snapshot, TimeSeries,
};
pub use pml::{courant_dt, AxisProfile, PmlParams};
pub use source::{SourceKind, SourceSpec};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{for_each_row, Execution};
use crate::geometry::{CellKind, MaterialGrid, Region};
use crate::materials::{Dielectric, DrudeMaterial};
use crate::units::{ev_to_omega, EPS0, MU0, NM};

/// Materials assigned to the cell kinds of a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Media {
    pub metal: DrudeMaterial,
    pub dielectric: Dielectric,
}

impl Media {
    pub fn silver_gaas() -> Self {
        Self {
            metal: DrudeMaterial::silver(),
            dielectric: Dielectric::gaas(),
        }
    }

    pub fn background_eps(&self, kind: CellKind) -> f64 {
        match kind {
            CellKind::Air => 1.0,
            CellKind::Dielectric => self.dielectric.permittivity,
            CellKind::Metal => self.metal.eps_inf,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdtdSettings {
    /// Fraction of the 2D Courant limit `dx / (c sqrt 2)`.
    pub dt_safety: f64,
    pub pml_order: f64,
    pub pml_reflection: f64,
    pub pml_alpha: f64,
    /// Absorbing layers on the left/right walls.
    pub pml_x: bool,
    /// Absorbing layers on the bottom/top walls.
    pub pml_z: bool,
    /// Photon energy (eV) used to scale the CFS shift of the PML.
    pub reference_energy: f64,
    pub execution: Execution,
    /// Steps between NaN/Inf checks.
    pub check_interval: usize,
}

impl Default for FdtdSettings {
    fn default() -> Self {
        Self {
            dt_safety: 0.99,
            pml_order: 3.0,
            pml_reflection: 1e-8,
            pml_alpha: 0.05,
            pml_x: true,
            pml_z: true,
            reference_energy: 1.3,
            execution: Execution::default(),
            check_interval: 512,
        }
    }
}

/// Drude current on the E nodes that touch metal.
#[derive(Debug, Clone, Default)]
struct MetalNodes {
    idx: Vec<usize>,
    /// Metal fraction f of the node.
    frac: Vec<f64>,
    /// `dt / (eps0 eps)` of the node.
    coef: Vec<f64>,
    j: Vec<f64>,
    j_prev: Vec<f64>,
}

/// Field arrays of a run. `jx`, `jz` live only on metal nodes.
#[derive(Debug, Clone)]
pub struct FieldState {
    pub ex: Vec<f64>,
    pub ez: Vec<f64>,
    pub hy: Vec<f64>,
    hy_prev: Vec<f64>,
    psi_hy_x: Vec<f64>,
    psi_hy_z: Vec<f64>,
    psi_ex_z: Vec<f64>,
    psi_ez_x: Vec<f64>,
    jx: MetalNodes,
    jz: MetalNodes,
    pub time_step_index: usize,
}

impl FieldState {
    pub fn is_finite(&self) -> bool {
        self.ex.iter().chain(&self.ez).chain(&self.hy).all(|v| v.is_finite())
            && self.jx.j.iter().chain(&self.jz.j).all(|v| v.is_finite())
    }

    /// Sets the Drude current on the `Ex` or `Ez` node with flat index `idx`.
    pub fn set_current(&mut self, component: Component, idx: usize, value: f64) -> Result<()> {
        let nodes = match component {
            Component::Ex => &mut self.jx,
            Component::Ez => &mut self.jz,
            Component::Hy => return Err(Error::Domain("Hy carries no current".into())),
        };
        match nodes.idx.iter().position(|&n| n == idx) {
            Some(n) => {
                nodes.j[n] = value;
                Ok(())
            }
            None => Err(Error::Domain(format!("node {idx} does not touch metal"))),
        }
    }

    /// Drude currents as full-grid arrays (zero away from metal nodes).
    pub fn current_arrays(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.ex.len();
        let expand = |m: &MetalNodes| {
            let mut out = vec![0.0; n];
            for (&idx, &j) in m.idx.iter().zip(&m.j) {
                out[idx] = j;
            }
            out
        };
        (expand(&self.jx), expand(&self.jz))
    }
}

struct DftAccumulator {
    name: String,
    omega: f64,
    start_step: usize,
    cadence: usize,
    ex: Vec<Complex64>,
    ez: Vec<Complex64>,
    samples: usize,
}

/// A configured run: grid coefficients, fields, sources and monitors.
pub struct Simulation {
    nx: usize,
    nz: usize,
    dx: f64,
    dt: f64,
    settings: FdtdSettings,
    media: Media,
    eps_x: Vec<f64>,
    eps_z: Vec<f64>,
    cex: Vec<f64>,
    cez: Vec<f64>,
    chy: f64,
    kj: f64,
    bj: f64,
    eta: f64,
    wp2: f64,
    px_e: AxisProfile,
    px_h: AxisProfile,
    pz_e: AxisProfile,
    pz_h: AxisProfile,
    px_e_active: Vec<usize>,
    px_h_active: Vec<usize>,
    pz_e_active: Vec<usize>,
    pz_h_active: Vec<usize>,
    physical: Region,
    kinds: Vec<CellKind>,
    state: FieldState,
    sources: Vec<SourceSpec>,
    monitors: Vec<MonitorSpec>,
    series: Vec<TimeSeries>,
    dfts: Vec<DftAccumulator>,
}

impl Simulation {
    pub fn new(grid: &MaterialGrid, media: &Media, settings: &FdtdSettings) -> Result<Self> {
        let dt = settings.dt_safety * courant_dt(grid.dx * NM);
        Self::with_dt(grid, media, settings, dt)
    }

    /// Like [`Simulation::new`] with an explicit time step. Steps above the
    /// Courant limit are a configuration error.
    pub fn with_dt(grid: &MaterialGrid, media: &Media, settings: &FdtdSettings, dt: f64) -> Result<Self> {
        media.metal.validate()?;
        let limit = courant_dt(grid.dx * NM);
        if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
            return Err(Error::config(
                "fdtd.dt_safety",
                format!("time step {dt:.4e} s violates the Courant limit {limit:.4e} s"),
            ));
        }
        if grid.pml_cells == 0 && (settings.pml_x || settings.pml_z) {
            return Err(Error::config("fdtd.pml_cells", "PML enabled with zero cells"));
        }
        let (nx, nz) = (grid.nx, grid.nz);
        let n = nx * nz;
        let dx = grid.dx * NM;
        let eps_bg = |i: usize, k: usize| media.background_eps(grid.kind(i, k));
        let is_metal = |i: usize, k: usize| (grid.kind(i, k) == CellKind::Metal) as u8 as f64;

        let mut eps_x = vec![1.0; n];
        let mut eps_z = vec![1.0; n];
        let mut cex = vec![0.0; n];
        let mut cez = vec![0.0; n];
        let mut mx = MetalNodes::default();
        let mut mz = MetalNodes::default();
        for i in 0..nx {
            for k in 0..nz {
                let idx = i * nz + k;
                if k >= 1 {
                    let e = 0.5 * (eps_bg(i, k - 1) + eps_bg(i, k));
                    eps_x[idx] = e;
                    cex[idx] = dt / (EPS0 * e * dx);
                    let f = 0.5 * (is_metal(i, k - 1) + is_metal(i, k));
                    if f > 0.0 {
                        mx.idx.push(idx);
                        mx.frac.push(f);
                        mx.coef.push(dt / (EPS0 * e));
                    }
                } else {
                    eps_x[idx] = eps_bg(i, k);
                }
                if i >= 1 {
                    let e = 0.5 * (eps_bg(i - 1, k) + eps_bg(i, k));
                    eps_z[idx] = e;
                    cez[idx] = dt / (EPS0 * e * dx);
                    let f = 0.5 * (is_metal(i - 1, k) + is_metal(i, k));
                    if f > 0.0 {
                        mz.idx.push(idx);
                        mz.frac.push(f);
                        mz.coef.push(dt / (EPS0 * e));
                    }
                } else {
                    eps_z[idx] = eps_bg(i, k);
                }
            }
        }
        mx.j = vec![0.0; mx.idx.len()];
        mx.j_prev = mx.j.clone();
        mz.j = vec![0.0; mz.idx.len()];
        mz.j_prev = mz.j.clone();

        let eta = media.metal.damping_rate();
        let wp = media.metal.plasma_omega();
        let half = 0.5 * eta * dt;
        let kj = (1.0 - half) / (1.0 + half);
        let bj = EPS0 * wp * wp * dt / (1.0 + half);

        let params = PmlParams {
            cells: grid.pml_cells,
            order: settings.pml_order,
            reflection: settings.pml_reflection,
            alpha_max: settings.pml_alpha,
        };
        let omega_ref = ev_to_omega(settings.reference_energy);
        let n_of = |kind: CellKind| media.background_eps(kind).sqrt();
        let n_bottom = n_of(grid.kind(nx / 2, 0));
        let n_top = n_of(grid.kind(nx / 2, nz - 1));
        let n_side = (n_bottom * n_top).sqrt();
        let side = |on: bool, n: f64| on.then_some(n);
        let px_e = AxisProfile::new(nx, 0.0, dx, dt, &params, side(settings.pml_x, n_side), side(settings.pml_x, n_side), omega_ref);
        let px_h = AxisProfile::new(nx, 0.5, dx, dt, &params, side(settings.pml_x, n_side), side(settings.pml_x, n_side), omega_ref);
        let pz_e = AxisProfile::new(nz, 0.0, dx, dt, &params, side(settings.pml_z, n_bottom), side(settings.pml_z, n_top), omega_ref);
        let pz_h = AxisProfile::new(nz, 0.5, dx, dt, &params, side(settings.pml_z, n_bottom), side(settings.pml_z, n_top), omega_ref);
        let active = |p: &AxisProfile| (0..p.c.len()).filter(|&j| p.active(j)).collect::<Vec<_>>();

        let physical = Region {
            i0: if settings.pml_x { grid.pml_cells } else { 0 },
            i1: if settings.pml_x { nx - grid.pml_cells } else { nx },
            k0: if settings.pml_z { grid.pml_cells } else { 0 },
            k1: if settings.pml_z { nz - grid.pml_cells } else { nz },
        };
        let metal_outside = (0..nx).any(|i| (0..nz).any(|k| !physical.contains(i, k) && grid.kind(i, k) == CellKind::Metal));
        if metal_outside {
            return Err(Error::config("geometry", "metal cells inside the PML"));
        }

        Ok(Self {
            nx,
            nz,
            dx,
            dt,
            settings: settings.clone(),
            media: *media,
            eps_x,
            eps_z,
            cex,
            cez,
            chy: dt / (MU0 * dx),
            kj,
            bj,
            eta,
            wp2: wp * wp,
            px_e_active: active(&px_e),
            px_h_active: active(&px_h),
            pz_e_active: active(&pz_e),
            pz_h_active: active(&pz_h),
            px_e,
            px_h,
            pz_e,
            pz_h,
            physical,
            kinds: grid.cells().to_vec(),
            state: FieldState {
                ex: vec![0.0; n],
                ez: vec![0.0; n],
                hy: vec![0.0; n],
                hy_prev: vec![0.0; n],
                psi_hy_x: vec![0.0; n],
                psi_hy_z: vec![0.0; n],
                psi_ex_z: vec![0.0; n],
                psi_ez_x: vec![0.0; n],
                jx: mx,
                jz: mz,
                time_step_index: 0,
            },
            sources: Vec::new(),
            monitors: Vec::new(),
            series: Vec::new(),
            dfts: Vec::new(),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dx_m(&self) -> f64 {
        self.dx
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.nz)
    }

    pub fn media(&self) -> &Media {
        &self.media
    }

    pub fn state(&self) -> &FieldState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut FieldState {
        &mut self.state
    }

    pub fn time(&self) -> f64 {
        self.state.time_step_index as f64 * self.dt
    }

    /// Region excluding the PML layers.
    pub fn physical_region(&self) -> Region {
        self.physical
    }

    pub fn set_execution(&mut self, exec: Execution) {
        self.settings.execution = exec;
    }

    pub fn add_source(&mut self, source: SourceSpec) -> Result<()> {
        let (i, k) = source.position;
        let ok = match source.kind {
            SourceKind::ElectricDipoleZ => {
                i >= 1 && i < self.nx && k < self.nz
                    && self.physical.contains(i, k)
                    && self.physical.contains(i - 1, k)
                    && self.kinds[i * self.nz + k] != CellKind::Metal
                    && self.kinds[(i - 1) * self.nz + k] != CellKind::Metal
            }
            SourceKind::ElectricDipoleX => {
                k >= 1 && i < self.nx && k < self.nz
                    && self.physical.contains(i, k)
                    && self.physical.contains(i, k - 1)
                    && self.kinds[i * self.nz + k] != CellKind::Metal
                    && self.kinds[i * self.nz + k - 1] != CellKind::Metal
            }
            SourceKind::PlaneWaveX => {
                k >= 1 && k < self.nz && self.physical.k0 <= k - 1 && k < self.physical.k1
                    && (0..self.nx).all(|ii| {
                        self.kinds[ii * self.nz + k] != CellKind::Metal
                            && self.kinds[ii * self.nz + k - 1] != CellKind::Metal
                    })
            }
        };
        if !ok {
            return Err(Error::config(
                "source.position",
                format!("source at {:?} lies in the PML, in metal or outside the grid", source.position),
            ));
        }
        if !(source.bandwidth_energy > 0.0) {
            return Err(Error::config("source.bandwidth_energy_ev", "bandwidth must be positive"));
        }
        self.sources.push(source);
        Ok(())
    }

    pub fn add_monitor(&mut self, monitor: MonitorSpec) -> Result<()> {
        let inside = |r: &Region| r.i0 < r.i1 && r.k0 < r.k1 && r.inside(&self.physical) && r.i0 >= 1 && r.k0 >= 1 && r.i1 < self.nx && r.k1 < self.nz;
        let ok = match &monitor.kind {
            MonitorKind::PointProbe { i, k, .. } => self.physical.contains(*i, *k),
            MonitorKind::FluxLine { region, .. }
            | MonitorKind::EnergyRegion { region }
            | MonitorKind::AbsorptionRegion { region } => inside(region),
            MonitorKind::FieldSnapshot { omega, .. } => *omega > 0.0,
        };
        if !ok {
            return Err(Error::config(
                format!("monitors.{}", monitor.name),
                "monitor region overlaps the PML or leaves the grid",
            ));
        }
        match &monitor.kind {
            MonitorKind::FieldSnapshot { omega, start_step } => self.dfts.push(DftAccumulator {
                name: monitor.name.clone(),
                omega: *omega,
                start_step: *start_step,
                cadence: monitor.cadence,
                ex: vec![Complex64::default(); self.nx * self.nz],
                ez: vec![Complex64::default(); self.nx * self.nz],
                samples: 0,
            }),
            _ => self.series.push(TimeSeries {
                name: monitor.name.clone(),
                samples: Vec::new(),
            }),
        }
        self.monitors.push(monitor);
        Ok(())
    }

    /// Advances the fields by one time step.
    pub fn step(&mut self) -> Result<()> {
        let n = self.state.time_step_index;
        let sampling = self
            .monitors
            .iter()
            .any(|m| !matches!(m.kind, MonitorKind::FieldSnapshot { .. }) && n % m.cadence == 0);
        if sampling {
            self.state.hy_prev.copy_from_slice(&self.state.hy);
            self.state.jx.j_prev.copy_from_slice(&self.state.jx.j);
            self.state.jz.j_prev.copy_from_slice(&self.state.jz.j);
        }
        self.update_h();
        self.update_j();
        if sampling {
            self.record(n);
        }
        self.accumulate_dft(n);
        self.update_e();
        self.inject_sources(n);
        self.state.time_step_index += 1;
        let check = self.settings.check_interval.max(1);
        if self.state.time_step_index % check == 0 && !self.state.is_finite() {
            return Err(Error::Instability {
                step: self.state.time_step_index,
            });
        }
        Ok(())
    }

    pub fn run_steps(&mut self, steps: usize) -> Result<()> {
        for _ in 0..steps {
            self.step()?;
        }
        if !self.state.is_finite() {
            return Err(Error::Instability {
                step: self.state.time_step_index,
            });
        }
        Ok(())
    }

    fn update_h(&mut self) {
        let nz = self.nz;
        let nx = self.nx;
        let chy = self.chy;
        let FieldState { ex, ez, hy, .. } = &mut self.state;
        let (ex, ez) = (&*ex, &*ez);
        for_each_row(self.settings.execution, hy, nz, |i, hy_row| {
            let ex_row = &ex[i * nz..(i + 1) * nz];
            let ez_row = &ez[i * nz..(i + 1) * nz];
            if i + 1 < nx {
                let ez_next = &ez[(i + 1) * nz..(i + 2) * nz];
                for (((h, exw), ezn), ezc) in hy_row[..nz - 1]
                    .iter_mut()
                    .zip(ex_row.windows(2))
                    .zip(ez_next)
                    .zip(ez_row)
                {
                    *h += chy * ((ezn - ezc) - (exw[1] - exw[0]));
                }
                hy_row[nz - 1] += chy * ((ez_next[nz - 1] - ez_row[nz - 1]) + ex_row[nz - 1]);
            } else {
                for ((h, exw), ezc) in hy_row[..nz - 1].iter_mut().zip(ex_row.windows(2)).zip(ez_row) {
                    *h += chy * (-ezc - (exw[1] - exw[0]));
                }
                hy_row[nz - 1] += chy * (-ez_row[nz - 1] + ex_row[nz - 1]);
            }
        });
        // CPML corrections
        let inv_dx = 1.0 / self.dx;
        let coef = chy * self.dx;
        let st = &mut self.state;
        for &i in &self.px_h_active {
            let (b, c) = (self.px_h.b[i], self.px_h.c[i]);
            for k in 0..nz {
                let idx = i * nz + k;
                let ez_next = if i + 1 < nx { st.ez[idx + nz] } else { 0.0 };
                let d = (ez_next - st.ez[idx]) * inv_dx;
                st.psi_hy_x[idx] = b * st.psi_hy_x[idx] + c * d;
                st.hy[idx] += coef * st.psi_hy_x[idx];
            }
        }
        for i in 0..nx {
            for &k in &self.pz_h_active {
                let (b, c) = (self.pz_h.b[k], self.pz_h.c[k]);
                let idx = i * nz + k;
                let ex_up = if k + 1 < nz { st.ex[idx + 1] } else { 0.0 };
                let d = (ex_up - st.ex[idx]) * inv_dx;
                st.psi_hy_z[idx] = b * st.psi_hy_z[idx] + c * d;
                st.hy[idx] -= coef * st.psi_hy_z[idx];
            }
        }
    }

    fn update_j(&mut self) {
        let (kj, bj) = (self.kj, self.bj);
        let st = &mut self.state;
        for (m, e) in [(&mut st.jx, &st.ex), (&mut st.jz, &st.ez)] {
            for ((j, &idx), &f) in m.j.iter_mut().zip(&m.idx).zip(&m.frac) {
                *j = kj * *j + bj * f * e[idx];
            }
        }
    }

    fn update_e(&mut self) {
        let nz = self.nz;
        let exec = self.settings.execution;
        let FieldState { ex, ez, hy, .. } = &mut self.state;
        let hy = &*hy;
        let cex = &self.cex;
        let cez = &self.cez;
        for_each_row(exec, ex, nz, |i, ex_row| {
            let h = &hy[i * nz..(i + 1) * nz];
            let c = &cex[i * nz..(i + 1) * nz];
            for ((e, c), hw) in ex_row[1..].iter_mut().zip(&c[1..]).zip(h.windows(2)) {
                *e -= c * (hw[1] - hw[0]);
            }
        });
        for_each_row(exec, ez, nz, |i, ez_row| {
            if i == 0 {
                return;
            }
            let h = &hy[i * nz..(i + 1) * nz];
            let hp = &hy[(i - 1) * nz..i * nz];
            let c = &cez[i * nz..(i + 1) * nz];
            for (((e, c), h), hp) in ez_row.iter_mut().zip(c).zip(h).zip(hp) {
                *e += c * (h - hp);
            }
        });
        let inv_dx = 1.0 / self.dx;
        let st = &mut self.state;
        for i in 0..self.nx {
            for &k in &self.pz_e_active {
                if k == 0 {
                    continue;
                }
                let (b, c) = (self.pz_e.b[k], self.pz_e.c[k]);
                let idx = i * nz + k;
                let d = (st.hy[idx] - st.hy[idx - 1]) * inv_dx;
                st.psi_ex_z[idx] = b * st.psi_ex_z[idx] + c * d;
                st.ex[idx] -= self.cex[idx] * self.dx * st.psi_ex_z[idx];
            }
        }
        for &i in &self.px_e_active {
            if i == 0 {
                continue;
            }
            let (b, c) = (self.px_e.b[i], self.px_e.c[i]);
            for k in 0..nz {
                let idx = i * nz + k;
                let d = (st.hy[idx] - st.hy[idx - nz]) * inv_dx;
                st.psi_ez_x[idx] = b * st.psi_ez_x[idx] + c * d;
                st.ez[idx] += self.cez[idx] * self.dx * st.psi_ez_x[idx];
            }
        }
        for (m, e) in [(&st.jx, &mut st.ex), (&st.jz, &mut st.ez)] {
            for ((&idx, &coef), &j) in m.idx.iter().zip(&m.coef).zip(&m.j) {
                e[idx] -= coef * j;
            }
        }
    }

    fn inject_sources(&mut self, n: usize) {
        let t = (n as f64 + 0.5) * self.dt;
        let nz = self.nz;
        for s in &self.sources {
            let v = s.value(t);
            if v == 0.0 {
                continue;
            }
            let (i, k) = s.position;
            match s.kind {
                SourceKind::ElectricDipoleZ => {
                    let idx = i * nz + k;
                    self.state.ez[idx] -= self.cez[idx] * self.dx * v;
                }
                SourceKind::ElectricDipoleX => {
                    let idx = i * nz + k;
                    self.state.ex[idx] -= self.cex[idx] * self.dx * v;
                }
                SourceKind::PlaneWaveX => {
                    for ii in 0..self.nx {
                        let idx = ii * nz + k;
                        self.state.ex[idx] -= self.cex[idx] * self.dx * v;
                    }
                }
            }
        }
    }

    /// True once every source has switched off.
    pub fn sources_off(&self) -> bool {
        let t = self.time();
        self.sources.iter().all(|s| t > s.turnoff_time())
    }

    pub fn source_turnoff_time(&self) -> f64 {
        self.sources.iter().map(|s| s.turnoff_time()).fold(0.0, f64::max)
    }

    fn sampler(&self, averaged: bool) -> Sampler<'_> {
        Sampler {
            sim: self,
            hy_prev: if averaged { &self.state.hy_prev } else { &self.state.hy },
            averaged,
        }
    }

    fn record(&mut self, n: usize) {
        let t = n as f64 * self.dt;
        let sampler = self.sampler(true);
        let mut values = Vec::new();
        for m in &self.monitors {
            if n % m.cadence != 0 {
                continue;
            }
            let value = match &m.kind {
                MonitorKind::PointProbe { component, i, k } => {
                    let idx = i * self.nz + k;
                    match component {
                        Component::Ex => self.state.ex[idx],
                        Component::Ez => self.state.ez[idx],
                        Component::Hy => 0.5 * (self.state.hy[idx] + self.state.hy_prev[idx]),
                    }
                }
                MonitorKind::FluxLine { region, side } => sampler.flux(region, *side),
                MonitorKind::EnergyRegion { region } => sampler.energy(region),
                MonitorKind::AbsorptionRegion { region } => sampler.absorbed(region),
                MonitorKind::FieldSnapshot { .. } => continue,
            };
            values.push((m.name.clone(), value));
        }
        for (name, value) in values {
            if let Some(s) = self.series.iter_mut().find(|s| s.name == name) {
                s.samples.push(Sample { step: n, time: t, value });
            }
        }
    }

    fn accumulate_dft(&mut self, n: usize) {
        let t = n as f64 * self.dt;
        let st = &self.state;
        for acc in &mut self.dfts {
            if n < acc.start_step || (n - acc.start_step) % acc.cadence != 0 {
                continue;
            }
            let ph = Complex64::from_polar(1.0, acc.omega * t);
            for (a, &e) in acc.ex.iter_mut().zip(&st.ex) {
                *a += ph * e;
            }
            for (a, &e) in acc.ez.iter_mut().zip(&st.ez) {
                *a += ph * e;
            }
            acc.samples += 1;
        }
    }

    /// Electromagnetic plus Drude kinetic energy in `region` (J/m), using the
    /// current arrays as they stand.
    pub fn energy_density_integral(&self, region: &Region) -> f64 {
        self.sampler(false).energy(region)
    }

    /// Instantaneous Drude dissipation in `region` (W/m).
    pub fn absorbed_power(&self, region: &Region) -> f64 {
        self.sampler(false).absorbed(region)
    }

    /// Outward flux through one side of `region` (W/m).
    pub fn flux(&self, region: &Region, side: Side) -> f64 {
        self.sampler(false).flux(region, side)
    }

    pub fn records(&self) -> MonitorRecords {
        MonitorRecords {
            dt: self.dt,
            steps: self.state.time_step_index,
            series: self.series.clone(),
            snapshots: self
                .dfts
                .iter()
                .map(|a| {
                    let norm = 1.0 / a.samples.max(1) as f64;
                    Snapshot {
                        name: a.name.clone(),
                        omega: a.omega,
                        nx: self.nx,
                        nz: self.nz,
                        ex: a.ex.iter().map(|v| v * norm).collect(),
                        ez: a.ez.iter().map(|v| v * norm).collect(),
                        samples: a.samples,
                    }
                })
                .collect(),
        }
    }

    /// Effective permittivity weights of the E nodes, `(eps_x, eps_z)`.
    pub fn node_permittivity(&self) -> (&[f64], &[f64]) {
        (&self.eps_x, &self.eps_z)
    }

    pub fn drude_constants(&self) -> (f64, f64) {
        (self.eta, self.wp2)
    }
}

/// Quadratures over the fields at integer time `n`: `H` and `J` are the
/// means of their half-step neighbours when `averaged` is set.
struct Sampler<'a> {
    sim: &'a Simulation,
    hy_prev: &'a [f64],
    averaged: bool,
}

impl Sampler<'_> {
    #[inline]
    fn hy(&self, idx: usize) -> f64 {
        0.5 * (self.sim.state.hy[idx] + self.hy_prev[idx])
    }

    fn j_bar(&self, m: &MetalNodes, n: usize) -> f64 {
        if self.averaged {
            0.5 * (m.j[n] + m.j_prev[n])
        } else {
            m.j[n]
        }
    }

    /// Half weights on the region faces that E nodes sit on.
    fn ex_weight(r: &Region, i: usize, k: usize) -> f64 {
        if i < r.i0 || i >= r.i1 || k < r.k0 || k > r.k1 {
            0.0
        } else if k == r.k0 || k == r.k1 {
            0.5
        } else {
            1.0
        }
    }

    fn ez_weight(r: &Region, i: usize, k: usize) -> f64 {
        if i < r.i0 || i > r.i1 || k < r.k0 || k >= r.k1 {
            0.0
        } else if i == r.i0 || i == r.i1 {
            0.5
        } else {
            1.0
        }
    }

    fn energy(&self, r: &Region) -> f64 {
        let sim = self.sim;
        let nz = sim.nz;
        let st = &sim.state;
        let mut e_sum = 0.0;
        for i in r.i0..=r.i1 {
            for k in r.k0..=r.k1 {
                let idx = i * nz + k;
                let wx = Self::ex_weight(r, i, k);
                if wx > 0.0 {
                    e_sum += wx * sim.eps_x[idx] * st.ex[idx] * st.ex[idx];
                }
                let wz = Self::ez_weight(r, i, k);
                if wz > 0.0 {
                    e_sum += wz * sim.eps_z[idx] * st.ez[idx] * st.ez[idx];
                }
            }
        }
        let mut h_sum = 0.0;
        for i in r.i0..r.i1 {
            for k in r.k0..r.k1 {
                let h = self.hy(i * nz + k);
                h_sum += h * h;
            }
        }
        let mut kin = 0.0;
        let denom = EPS0 * sim.wp2;
        for (m, wfn) in [
            (&st.jx, Self::ex_weight as fn(&Region, usize, usize) -> f64),
            (&st.jz, Self::ez_weight),
        ] {
            for (n, (&idx, &f)) in m.idx.iter().zip(&m.frac).enumerate() {
                let w = wfn(r, idx / nz, idx % nz);
                if w > 0.0 {
                    let j = self.j_bar(m, n);
                    kin += w * j * j / (f * denom);
                }
            }
        }
        let area = sim.dx * sim.dx;
        area * (0.5 * EPS0 * e_sum + 0.5 * MU0 * h_sum + 0.5 * kin)
    }

    fn absorbed(&self, r: &Region) -> f64 {
        let sim = self.sim;
        if sim.eta == 0.0 {
            return 0.0;
        }
        let nz = sim.nz;
        let st = &sim.state;
        let denom = EPS0 * sim.wp2;
        let mut p = 0.0;
        for (m, wfn) in [
            (&st.jx, Self::ex_weight as fn(&Region, usize, usize) -> f64),
            (&st.jz, Self::ez_weight),
        ] {
            for (n, (&idx, &f)) in m.idx.iter().zip(&m.frac).enumerate() {
                let w = wfn(r, idx / nz, idx % nz);
                if w > 0.0 {
                    let j = self.j_bar(m, n);
                    p += w * j * j / (f * denom);
                }
            }
        }
        sim.eta * p * sim.dx * sim.dx
    }

    fn flux(&self, r: &Region, side: Side) -> f64 {
        let sim = self.sim;
        let nz = sim.nz;
        let st = &sim.state;
        let mut s = 0.0;
        match side {
            Side::Bottom | Side::Top => {
                let k = if side == Side::Bottom { r.k0 } else { r.k1 };
                let sign = if side == Side::Bottom { -1.0 } else { 1.0 };
                for i in r.i0..r.i1 {
                    let idx = i * nz + k;
                    s += sign * st.ex[idx] * 0.5 * (self.hy(idx - 1) + self.hy(idx));
                }
            }
            Side::Left | Side::Right => {
                let i = if side == Side::Left { r.i0 } else { r.i1 };
                let sign = if side == Side::Left { 1.0 } else { -1.0 };
                for k in r.k0..r.k1 {
                    let idx = i * nz + k;
                    s += sign * st.ez[idx] * 0.5 * (self.hy(idx - nz) + self.hy(idx));
                }
            }
        }
        s * sim.dx
    }
}

/// Runs `duration` steps with one source and the given monitors.
pub fn run(
    grid: &MaterialGrid,
    media: &Media,
    settings: &FdtdSettings,
    source: SourceSpec,
    monitors: Vec<MonitorSpec>,
    duration: usize,
) -> Result<MonitorRecords> {
    let mut sim = Simulation::new(grid, media, settings)?;
    sim.add_source(source)?;
    for m in monitors {
        sim.add_monitor(m)?;
    }
    sim.run_steps(duration)?;
    Ok(sim.records())
}
