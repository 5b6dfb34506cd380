//! Validation harnesses shared by the engine tests and the acceptance suite.
//! Each harness carries its own analytic oracle.

#![allow(dead_code)]

use num_complex::Complex64;
use plasmon_dbr::fdtd::{Component, FdtdSettings, Media, MonitorKind, MonitorSpec, Simulation, SourceKind, SourceSpec};
use plasmon_dbr::geometry::{CellKind, MaterialGrid, Region};
use plasmon_dbr::materials::DrudeMaterial;
use plasmon_dbr::units::{ev_to_omega, C0, NM};

pub const PML: usize = 20;

/// `sum x_n e^{+i w t_n}`: complex amplitude in the `exp(-i w t)` convention.
pub fn phasor(values: &[f64], times: &[f64], omega: f64) -> Complex64 {
    values
        .iter()
        .zip(times)
        .map(|(v, t)| Complex64::from_polar(*v, omega * t))
        .sum()
}

/// Normal-incidence amplitude reflection from vacuum onto a medium of
/// permittivity `eps` (principal root, `Im n >= 0`).
pub fn fresnel_r(eps: Complex64) -> Complex64 {
    let n = eps.sqrt();
    let n = if n.im < 0.0 { -n } else { n };
    (1.0 - n) / (1.0 + n)
}

/// Numerical vacuum wavenumber of the 1D leapfrog scheme.
pub fn numerical_k(omega: f64, dx: f64, dt: f64) -> f64 {
    2.0 / dx * ((dx / (C0 * dt)) * (omega * dt / 2.0).sin()).asin()
}

pub struct FresnelResult {
    /// `(energy eV, simulated r, analytic r)`.
    pub rows: Vec<(f64, Complex64, Complex64)>,
    /// Largest `|r_sim - r_an| / |r_an|`.
    pub max_rel_error: f64,
}

/// Plane wave at normal incidence on a metal half-space (a slab much thicker
/// than the skin depth), compared against the Fresnel formula built from
/// the Drude permittivity.
pub fn fresnel_check(metal: DrudeMaterial, dx_nm: f64, band_ev: (f64, f64), points: usize) -> FresnelResult {
    let nx = 4;
    let metal_cells = (300.0 / dx_nm).round() as usize;
    let k_metal0 = PML + 10;
    let k_surface = k_metal0 + metal_cells;
    let k_probe = k_surface + 10;
    let k_source = k_probe + 20;
    let nz = k_source + 40 + PML;
    let media = Media {
        metal,
        dielectric: plasmon_dbr::materials::Dielectric::gaas(),
    };
    let settings = FdtdSettings {
        pml_x: false,
        ..Default::default()
    };
    let center = 0.5 * (band_ev.0 + band_ev.1);
    let fwhm = 1.2 * (band_ev.1 - band_ev.0);
    let run = |with_metal: bool| {
        let mut grid = MaterialGrid::uniform(nx, nz, dx_nm, PML, CellKind::Air);
        if with_metal {
            for i in 0..nx {
                for k in k_metal0..k_surface {
                    grid.set_kind(i, k, CellKind::Metal);
                }
            }
        }
        let mut sim = Simulation::new(&grid, &media, &settings).unwrap();
        sim.add_source(SourceSpec::gaussian(SourceKind::PlaneWaveX, (0, k_source), center, fwhm)).unwrap();
        sim.add_monitor(MonitorSpec::new(
            "probe",
            MonitorKind::PointProbe { component: Component::Ex, i: 1, k: k_probe },
            1,
        ))
        .unwrap();
        let t_end = sim.source_turnoff_time() + 60e-15;
        let steps = (t_end / sim.dt()).ceil() as usize;
        sim.run_steps(steps).unwrap();
        (sim.records().series("probe").unwrap().clone(), sim.dt())
    };
    let (incident, dt) = run(false);
    let (total, _) = run(true);
    let times = incident.times();
    let inc = incident.values();
    let refl: Vec<f64> = total.values().iter().zip(&inc).map(|(a, b)| a - b).collect();
    let d = (k_probe - k_surface) as f64 * dx_nm * NM;
    let mut rows = Vec::new();
    let mut max_rel_error: f64 = 0.0;
    for p in 0..points {
        let e = band_ev.0 + (band_ev.1 - band_ev.0) * p as f64 / (points - 1) as f64;
        let w = ev_to_omega(e);
        let k = numerical_k(w, dx_nm * NM, dt);
        let r_sim = phasor(&refl, &times, w) / phasor(&inc, &times, w) * Complex64::from_polar(1.0, -2.0 * k * d);
        let r_an = fresnel_r(metal.permittivity_at(w).unwrap());
        max_rel_error = max_rel_error.max((r_sim - r_an).norm() / r_an.norm());
        rows.push((e, r_sim, r_an));
    }
    FresnelResult { rows, max_rel_error }
}

pub struct PmlResult {
    /// Field reflection near the PML relative to the incident peak, dB.
    pub reflection_db: f64,
    /// Radiated energy through the inner and outer boxes, PML-terminated
    /// domain over reference domain.
    pub flux_ratio_inner: f64,
    pub flux_ratio_outer: f64,
}

/// Dipole in vacuum: a small PML-terminated domain against a domain large
/// enough that nothing returns from its boundary within the observation
/// window.
pub fn pml_check(dx_nm: f64, center_ev: f64, fwhm_ev: f64) -> PmlResult {
    let half = 60usize;
    let (r_inner, r_outer) = (25usize, 45usize);
    let probe_offset = half - 3;
    let source = SourceSpec::gaussian(SourceKind::ElectricDipoleZ, (0, 0), center_ev, fwhm_ev);
    let dx = dx_nm * NM;
    let dt = FdtdSettings::default().dt_safety * plasmon_dbr::fdtd::courant_dt(dx);
    // time for a reflection off the small domain's PML to cross back through
    // the inner box, plus the pulse length
    let t_window = source.turnoff_time() + 4.0 * (half as f64) * dx / C0;
    // a reflection from the reference boundary must travel out and back
    let margin = ((C0 * t_window) / (2.0 * dx)).ceil() as usize;
    let steps = (t_window / dt).ceil() as usize;

    let run = |extra: usize| {
        let n = 2 * (half + extra + PML) + 1;
        let grid = MaterialGrid::uniform(n, n, dx_nm, PML, CellKind::Air);
        let c = n / 2;
        let mut sim = Simulation::new(&grid, &Media::silver_gaas(), &FdtdSettings::default()).unwrap();
        let mut s = source.clone();
        s.position = (c, c);
        sim.add_source(s).unwrap();
        for (name, r) in [("inner", r_inner), ("outer", r_outer)] {
            let region = Region { i0: c - r, i1: c + r, k0: c - r, k1: c + r };
            for m in MonitorSpec::flux_box(name, region, 1) {
                sim.add_monitor(m).unwrap();
            }
        }
        for (name, i, k) in [("px", c + probe_offset, c), ("pd", c + probe_offset * 7 / 10, c + probe_offset * 7 / 10)] {
            sim.add_monitor(MonitorSpec::new(name, MonitorKind::PointProbe { component: Component::Ez, i, k }, 1)).unwrap();
        }
        sim.run_steps(steps).unwrap();
        sim.records()
    };
    let small = run(0);
    let big = run(margin);
    let mut worst: f64 = 0.0;
    for name in ["px", "pd"] {
        let a = small.series(name).unwrap().values();
        let b = big.series(name).unwrap().values();
        let peak = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        worst = worst.max(err / peak);
    }
    let energy = |rec: &plasmon_dbr::fdtd::MonitorRecords, name: &str| {
        let names: Vec<String> = ["bottom", "top", "left", "right"].iter().map(|s| format!("{name}_{s}")).collect();
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        rec.sum_series(&refs).unwrap().values().iter().sum::<f64>() * rec.dt
    };
    PmlResult {
        reflection_db: 20.0 * worst.log10(),
        flux_ratio_inner: energy(&small, "inner") / energy(&big, "inner"),
        flux_ratio_outer: energy(&small, "outer") / energy(&big, "outer"),
    }
}

pub struct ClosureResult {
    /// RMS of `dU/dt + P_out + P_abs` over the peak of `P_out + P_abs`.
    pub rms_relative: f64,
    pub samples: usize,
}

/// Discrete Poynting theorem around a lossy metal block after the dipole
/// has switched off.
pub fn poynting_closure(dx_nm: f64) -> ClosureResult {
    let n = 2 * PML + 90;
    let mut grid = MaterialGrid::uniform(n, n, dx_nm, PML, CellKind::Air);
    let c = n / 2;
    for i in c - 12..c + 12 {
        for k in c - 20..c - 8 {
            grid.set_kind(i, k, CellKind::Metal);
        }
    }
    for i in PML..n - PML {
        for k in PML..c - 20 {
            grid.set_kind(i, k, CellKind::Dielectric);
        }
    }
    let metal = DrudeMaterial::silver().with_loss_factor(1.0);
    let media = Media {
        metal,
        dielectric: plasmon_dbr::materials::Dielectric::gaas(),
    };
    let mut sim = Simulation::new(&grid, &media, &FdtdSettings::default()).unwrap();
    sim.add_source(SourceSpec::gaussian(SourceKind::ElectricDipoleZ, (c, c - 4), 1.32, 0.88)).unwrap();
    let region = Region { i0: c - 25, i1: c + 25, k0: c - 30, k1: c + 10 };
    sim.add_monitor(MonitorSpec::new("u", MonitorKind::EnergyRegion { region }, 1)).unwrap();
    sim.add_monitor(MonitorSpec::new("abs", MonitorKind::AbsorptionRegion { region }, 1)).unwrap();
    for m in MonitorSpec::flux_box("f", region, 1) {
        sim.add_monitor(m).unwrap();
    }
    let t_off = sim.source_turnoff_time();
    let steps = ((t_off + 40e-15) / sim.dt()).ceil() as usize;
    sim.run_steps(steps).unwrap();
    let rec = sim.records();
    let u = rec.series("u").unwrap();
    let a = rec.series("abs").unwrap().values();
    let f = rec.sum_series(&["f_bottom", "f_top", "f_left", "f_right"]).unwrap().values();
    let dt = rec.dt;
    let mut resid = Vec::new();
    let mut peak: f64 = 0.0;
    for j in 1..u.samples.len() - 1 {
        if u.samples[j].time < t_off {
            continue;
        }
        let du = (u.samples[j + 1].value - u.samples[j - 1].value) / (2.0 * dt);
        let out = f[j] + a[j];
        peak = peak.max(out.abs());
        resid.push(du + out);
    }
    let rms = (resid.iter().map(|r| r * r).sum::<f64>() / resid.len() as f64).sqrt();
    ClosureResult {
        rms_relative: rms / peak,
        samples: resid.len(),
    }
}

pub struct SurfaceWaveResult {
    pub wavelength_nm: f64,
    pub analytic_nm: f64,
    /// Propagation constant fitted from the line of phasors, 1/m.
    pub k_fit: Complex64,
}

/// Dipole next to a flat metal/dielectric interface. The `Ez` phasor along
/// a line just below the interface is a sum of counter-propagating surface
/// waves `e^{+-ikx}`, which obey `u[n+1] + u[n-1] = 2 cos(k dx) u[n]`; the
/// least-squares `cos(k dx)` over a window away from the source and the film
/// ends gives `k`.
pub fn surface_wave(metal: DrudeMaterial, dx_nm: f64, energy_ev: f64) -> SurfaceWaveResult {
    let cells = |nm: f64| (nm / dx_nm).round() as usize;
    let (diel, film, air, margin) = (cells(200.0), cells(100.0), cells(40.0), cells(60.0));
    let length = cells(2000.0);
    let nx = 2 * PML + 2 * margin + length;
    let nz = 2 * PML + diel + film + air;
    let k_if = PML + diel;
    let mut grid = MaterialGrid::uniform(nx, nz, dx_nm, PML, CellKind::Air);
    for i in 0..nx {
        for k in PML..k_if {
            grid.set_kind(i, k, CellKind::Dielectric);
        }
    }
    let (m0, m1) = (PML + margin, PML + margin + length);
    for i in m0..m1 {
        for k in k_if..k_if + film {
            grid.set_kind(i, k, CellKind::Metal);
        }
    }
    let diel_eps = plasmon_dbr::materials::Dielectric::gaas();
    let media = Media { metal, dielectric: diel_eps };
    let settings = FdtdSettings {
        reference_energy: energy_ev,
        ..Default::default()
    };
    let mut sim = Simulation::new(&grid, &media, &settings).unwrap();
    let k_line = k_if - cells(10.0);
    let i_src = m0 + cells(150.0);
    sim.add_source(SourceSpec::gaussian(SourceKind::ElectricDipoleZ, (i_src, k_if - cells(6.0)), energy_ev, 0.1 * energy_ev))
        .unwrap();
    let omega = ev_to_omega(energy_ev);
    sim.add_monitor(MonitorSpec::new("dft", MonitorKind::FieldSnapshot { omega, start_step: 0 }, 1)).unwrap();
    let t_end = sim.source_turnoff_time() + 300e-15;
    sim.run_steps((t_end / sim.dt()).ceil() as usize).unwrap();
    let snap = sim.records().snapshot("dft").unwrap().clone();

    let (w0, w1) = (i_src + cells(500.0), m1 - cells(250.0));
    let u: Vec<Complex64> = (w0..w1).map(|i| snap.ez[i * snap.nz + k_line]).collect();
    let mut num = Complex64::default();
    let mut den = 0.0;
    for n in 1..u.len() - 1 {
        num += (u[n + 1] + u[n - 1]) * u[n].conj();
        den += 2.0 * u[n].norm_sqr();
    }
    let c = num / den;
    let dx = dx_nm * NM;
    let k_fit = c.acos() / dx;
    let k_fit = if k_fit.re < 0.0 { -k_fit } else { k_fit };
    let k_sp = plasmon_dbr::materials::sp_wavevector(&metal, &diel_eps, omega).unwrap();
    SurfaceWaveResult {
        wavelength_nm: 2.0 * std::f64::consts::PI / k_fit.re / NM,
        analytic_nm: 2.0 * std::f64::consts::PI / k_sp.re / NM,
        k_fit,
    }
}
