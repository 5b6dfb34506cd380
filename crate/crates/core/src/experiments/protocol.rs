//! Two-phase mode extraction: a broadband search run locates the resonances,
//! then a narrowband re-excitation at the chosen frequency is switched off and
//! its ring-down is analysed.

use serde::{Deserialize, Serialize};

use crate::analysis::{
    field_at_ez_node, field_fraction, peak_indices, find_resonances, fit_z_decay, linear_lsq, mode_volume, q_from_energy_balance,
    standing_wave_profile, BalanceSeries, LineCut, ModeRecord, ModeVolume, Resonance, ResonanceFlag,
    ResonanceOptions,
};
use crate::config::{DipoleOrientation, RunConfig};
use crate::cqed::{self, CqedReport, EmitterSpec};
use crate::error::{Error, Result};
use crate::fdtd::{Component, MonitorKind, MonitorSpec, Simulation, Snapshot, SourceSpec, TimeSeries};
use crate::geometry::{build_grid, MaterialGrid, Region};
use crate::units::{ev_to_omega, omega_to_ev};

/// Amplitude ratio between cavity and outer probes above which a resonance
/// counts as confined by the reflectors.
pub const LOCALIZATION_THRESHOLD: f64 = 3.0;

/// Progress callback: `(phase, steps done, steps total)`.
pub type Progress<'a> = &'a (dyn Fn(&str, usize, usize) + Sync);

pub fn no_progress(_: &str, _: usize, _: usize) {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub resonance: Resonance,
    /// RMS amplitude on the cavity probes over RMS amplitude on the probes
    /// beyond the reflectors.
    pub localization: f64,
    pub localized: bool,
    /// Within the configured window around the grating's Bragg energy.
    pub in_gap_window: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub candidates: Vec<Candidate>,
    pub steps: usize,
    /// Bragg energy of the grating from the plasmon dispersion, eV.
    pub bragg_energy_ev: f64,
}

impl SearchOutcome {
    /// Highest-Q confined, unflagged candidate near the Bragg energy.
    pub fn select(&self) -> Option<&Candidate> {
        self.candidates
            .iter()
            .filter(|c| c.localized && c.in_gap_window && !c.resonance.is_flagged())
            .max_by(|a, b| a.resonance.q.total_cmp(&b.resonance.q))
    }
}

struct Probe {
    name: String,
    node: (usize, usize),
    cavity: bool,
}

fn probes(cfg: &RunConfig, grid: &MaterialGrid) -> Result<Vec<Probe>> {
    let half = cfg.geometry.cavity_length_nm / 2.0;
    let depth = cfg.monitors.probe_depth_nm;
    let mut out = Vec::new();
    for (n, f) in cfg.monitors.probe_fractions.iter().enumerate() {
        let node = grid
            .emitter_position(f * half, depth)
            .map_err(|e| Error::config("monitors.probe_fractions", e.to_string()))?;
        out.push(Probe { name: format!("probe{n}"), node, cavity: true });
    }
    if let (Some(first), Some(last)) = (grid.grooves.first(), grid.grooves.last()) {
        let right = (last.1 + grid.slab_span.1) / 2;
        let left = (grid.slab_span.0 + first.0) / 2;
        for (n, i) in [left, right].into_iter().enumerate() {
            let x = (i as f64 - grid.center_i as f64) * grid.dx;
            let node = grid.emitter_position(x, depth)?;
            out.push(Probe { name: format!("outer{n}"), node, cavity: false });
        }
    }
    Ok(out)
}

fn source_at(cfg: &RunConfig, grid: &MaterialGrid, energy_ev: f64, bandwidth_ev: f64) -> Result<SourceSpec> {
    let node = grid
        .emitter_position(cfg.source.x_offset_nm, cfg.source.z_depth_nm)
        .map_err(|e| Error::config("source", e.to_string()))?;
    let mut s = SourceSpec::gaussian(cfg.source_kind(), node, energy_ev, bandwidth_ev);
    s.amplitude = cfg.source.amplitude;
    Ok(s)
}

fn advance(sim: &mut Simulation, steps: usize, phase: &str, progress: Progress<'_>) -> Result<()> {
    let chunk = 2000;
    let mut done = 0;
    while done < steps {
        let n = chunk.min(steps - done);
        sim.run_steps(n)?;
        done += n;
        progress(phase, done, steps);
    }
    Ok(())
}

fn tail(series: &TimeSeries, t0: f64) -> Vec<f64> {
    series.after(t0).values()
}

/// Amplitude of each `(omega, gamma)` mode in `values` sampled from `t = 0`
/// at spacing `dt`.
fn mode_amplitudes(values: &[f64], dt: f64, modes: &[(f64, f64)]) -> Vec<f64> {
    let n = values.len();
    let mut cols = Vec::with_capacity(2 * modes.len() + 1);
    for &(w, g) in modes {
        let (mut c, mut s) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for j in 0..n {
            let t = j as f64 * dt;
            let e = (-g * t).exp();
            c.push(e * (w * t).cos());
            s.push(e * (w * t).sin());
        }
        cols.push(c);
        cols.push(s);
    }
    cols.push(vec![1.0; n]);
    match linear_lsq(&cols, values) {
        Some((coef, _)) => coef.chunks(2).take(modes.len()).map(|c| c[0].hypot(c[1])).collect(),
        None => vec![0.0; modes.len()],
    }
}

/// Phase one: broadband excitation and resonance search.
pub fn search_modes(cfg: &RunConfig, progress: Progress<'_>) -> Result<SearchOutcome> {
    let grid = build_grid(&cfg.device_geometry(), cfg.geometry.dx_nm)?;
    let mut sim = Simulation::new(&grid, &cfg.media()?, &cfg.fdtd_settings())?;
    let source = source_at(cfg, &grid, cfg.source.search_center_ev, cfg.source.search_bandwidth_ev)?;
    let t_off = source.turnoff_time();
    sim.add_source(source)?;
    let probes = probes(cfg, &grid)?;
    let cadence = cfg.monitors.probe_cadence;
    for p in &probes {
        sim.add_monitor(MonitorSpec::new(
            &p.name,
            MonitorKind::PointProbe { component: Component::Ez, i: p.node.0, k: p.node.1 },
            cadence,
        ))?;
    }
    let period = 2.0 * std::f64::consts::PI / ev_to_omega(cfg.source.search_center_ev);
    let steps = ((t_off + cfg.fdtd.search_periods * period) / sim.dt()).ceil() as usize;
    advance(&mut sim, steps, "search", progress)?;
    let records = sim.records();
    let dt = records.dt * cadence as f64;
    let t_fit = t_off + (1.0 - cfg.monitors.fit_fraction) * (steps as f64 * records.dt - t_off);
    let band = ResonanceOptions::band(cfg.monitors.band_ev[0], cfg.monitors.band_ev[1]);

    let series: Vec<Vec<f64>> = probes
        .iter()
        .map(|p| tail(records.series(&p.name).expect("probe series"), t_fit))
        .collect();
    let mut found: Vec<Resonance> = Vec::new();
    for (p, s) in probes.iter().zip(&series) {
        if p.cavity {
            found.extend(find_resonances(s, dt, &band)?);
        }
    }
    // merge detections of the same resonance on different probes
    found.sort_by(|a, b| a.omega.total_cmp(&b.omega));
    let resolution = 2.0 * std::f64::consts::PI / (series[0].len() as f64 * dt);
    let mut clusters: Vec<Vec<Resonance>> = Vec::new();
    for r in found {
        match clusters.last_mut() {
            Some(c) if (r.omega - c[0].omega).abs() < resolution.max(c[0].decay_rate) => c.push(r),
            _ => clusters.push(vec![r]),
        }
    }
    let reps: Vec<Resonance> = clusters
        .into_iter()
        .map(|c| c.into_iter().max_by(|a, b| a.amplitude.total_cmp(&b.amplitude)).unwrap())
        .collect();
    let params: Vec<(f64, f64)> = reps.iter().map(|r| (r.omega, r.decay_rate)).collect();
    let amps: Vec<(bool, Vec<f64>)> = probes
        .iter()
        .zip(&series)
        .map(|(p, s)| (p.cavity, mode_amplitudes(s, dt, &params)))
        .collect();
    let rms = |cavity: bool, m: usize| {
        let v: Vec<f64> = amps.iter().filter(|a| a.0 == cavity).map(|a| a.1[m]).collect();
        (v.iter().map(|x| x * x).sum::<f64>() / v.len().max(1) as f64).sqrt()
    };
    let media = cfg.media()?;
    let bragg = crate::materials::bragg_energy(&media.metal.lossless(), &media.dielectric, cfg.geometry.period_nm)?;
    let window = cfg.monitors.bragg_window;
    let candidates = reps
        .into_iter()
        .enumerate()
        .map(|(m, resonance)| {
            let inner = rms(true, m);
            let outer = rms(false, m);
            let localization = if outer > 0.0 { (inner / outer).min(1e6) } else { 1e6 };
            Candidate {
                localization,
                localized: localization >= LOCALIZATION_THRESHOLD,
                in_gap_window: (resonance.energy_ev() / bragg - 1.0).abs() <= window,
                resonance,
            }
        })
        .collect();
    Ok(SearchOutcome { candidates, steps, bragg_energy_ev: bragg })
}

/// Phase-two result with the data needed for post-processing.
#[derive(Debug, Clone)]
pub struct RingDown {
    pub record: ModeRecord,
    pub volume: ModeVolume,
    pub cut: LineCut,
    pub snapshot: Snapshot,
    /// Ring-down resonance nearest the drive frequency.
    pub resonance: Resonance,
    pub steps: usize,
    /// Monitor time series of the ring-down run (empty when loaded from a
    /// cache).
    pub series: Vec<TimeSeries>,
}

fn cavity_box(cfg: &RunConfig, grid: &MaterialGrid) -> Region {
    let (c0, c1) = grid.cavity_span();
    let depth = (cfg.monitors.cavity_box_depth_nm / grid.dx).round() as usize;
    let phys = grid.physical_region();
    Region {
        i0: c0.max(phys.i0 + 1),
        i1: c1.min(phys.i1 - 1).max(c0 + 1),
        k0: grid.interface_k.saturating_sub(depth).max(phys.k0 + 1),
        k1: (grid.interface_k + grid.slab_rows + depth).min(phys.k1 - 1),
    }
}

/// Phase two: narrowband drive at `omega0`, switched off, ring-down recorded.
pub fn ring_down(cfg: &RunConfig, omega0: f64, progress: Progress<'_>) -> Result<RingDown> {
    let grid = build_grid(&cfg.device_geometry(), cfg.geometry.dx_nm)?;
    let media = cfg.media()?;
    let e0 = omega_to_ev(omega0);
    let mut settings = cfg.fdtd_settings();
    settings.reference_energy = e0;
    let mut sim = Simulation::new(&grid, &media, &settings)?;
    let source = source_at(cfg, &grid, e0, cfg.source.ringdown_bandwidth_fraction * e0)?;
    let t_off = source.turnoff_time();
    sim.add_source(source)?;
    let dt = sim.dt();
    let period = 2.0 * std::f64::consts::PI / omega0;
    let n_off = (t_off / dt).ceil() as usize;
    let steps = n_off + (cfg.fdtd.duration_periods * period / dt).ceil() as usize;

    let probes = probes(cfg, &grid)?;
    let pc = cfg.monitors.probe_cadence;
    for p in probes.iter().filter(|p| p.cavity) {
        sim.add_monitor(MonitorSpec::new(
            &p.name,
            MonitorKind::PointProbe { component: Component::Ez, i: p.node.0, k: p.node.1 },
            pc,
        ))?;
    }
    let phys = grid.physical_region();
    let ec = cfg.monitors.energy_cadence;
    sim.add_monitor(MonitorSpec::new("energy", MonitorKind::EnergyRegion { region: phys }, ec))?;
    sim.add_monitor(MonitorSpec::new("energy_cavity", MonitorKind::EnergyRegion { region: cavity_box(cfg, &grid) }, ec))?;
    sim.add_monitor(MonitorSpec::new("absorbed", MonitorKind::AbsorptionRegion { region: phys }, ec))?;
    for m in MonitorSpec::flux_box("flux", phys, ec) {
        sim.add_monitor(m)?;
    }
    let snap_cadence = ((period / dt) / cfg.monitors.snapshot_samples_per_period as f64).round().max(1.0) as usize;
    sim.add_monitor(MonitorSpec::new("mode", MonitorKind::FieldSnapshot { omega: omega0, start_step: n_off }, snap_cadence))?;
    advance(&mut sim, steps, "ring-down", progress)?;
    let records = sim.records();

    let t_end = steps as f64 * dt;
    let t0 = t_off + (1.0 - cfg.monitors.fit_fraction) * (t_end - t_off);
    let band = ResonanceOptions::band(cfg.monitors.band_ev[0], cfg.monitors.band_ev[1]);
    let mut best: Option<Resonance> = None;
    for p in probes.iter().filter(|p| p.cavity) {
        let s = tail(records.series(&p.name).expect("probe series"), t0);
        for r in find_resonances(&s, dt * pc as f64, &band)? {
            if (r.omega - omega0).abs() > 0.05 * omega0 {
                continue;
            }
            let better = match &best {
                None => true,
                Some(b) => r.amplitude > b.amplitude,
            };
            if better {
                best = Some(r);
            }
        }
    }
    let resonance = best.ok_or_else(|| {
        Error::Extraction(format!("no ring-down resonance near {e0:.4} eV"))
    })?;

    let get = |name: &str| records.series(name).expect("monitor series");
    let balance = q_from_energy_balance(
        BalanceSeries {
            energy: get("energy"),
            absorbed: get("absorbed"),
            flux_down: get("flux_bottom"),
            flux_up: get("flux_top"),
            flux_left: get("flux_left"),
            flux_right: get("flux_right"),
        },
        omega0,
        dt,
        t0,
        t_end,
    )?;
    let mean_after = |s: &TimeSeries| {
        let v = s.after(t0).values();
        v.iter().sum::<f64>() / v.len().max(1) as f64
    };
    let cavity_energy_fraction = mean_after(get("energy_cavity")) / mean_after(get("energy"));

    let snapshot = records.snapshot("mode").expect("mode snapshot").clone();
    let volume = mode_volume(&snapshot, &grid, &media, cfg.emitter.assumed_width_y_nm)?;
    let cut = standing_wave_profile(&snapshot, &grid, cfg.monitors.profile_depth_nm)?;
    let mut flags: Vec<String> = resonance.flags.iter().map(|f| format!("{f:?}")).collect();
    flags.extend(balance.flags.iter().map(|f| format!("{f:?}")));
    let (c0, c1) = grid.cavity_span();
    let phys = grid.physical_region();
    let antinode = central_antinode(&cut.e2[c0 - phys.i0..c1 - phys.i0], corner_margin(cfg, &grid)).map_or(grid.center_i, |j| c0 + j);
    let decay_z_nm = match fit_z_decay(&snapshot, &grid, antinode) {
        Ok(d) => Some(d),
        Err(e) => {
            flags.push(format!("decay fit: {e}"));
            None
        }
    };
    let omega_p = media.metal.plasma_omega();
    let record = ModeRecord {
        omega0,
        omega0_ev: e0,
        omega0_over_omega_p: omega0 / omega_p,
        cavity_length_nm: cfg.geometry.cavity_length_nm,
        q_total: balance.q_total,
        q_rad: balance.q_rad,
        q_abs: balance.q_abs,
        q_ringdown: resonance.q,
        energy_u: balance.energy_u,
        p_rad: balance.p_rad,
        p_abs: balance.p_abs,
        flux_split: balance.flux_split,
        cavity_energy_fraction,
        v_mode_per_width_nm2: volume.v_mode_per_width_nm2,
        decay_z_nm,
        peak_count: cut.peak_count,
        symmetry_rms: cut.symmetry_rms,
        flags,
    };
    Ok(RingDown { record, volume, cut, snapshot, resonance, steps, series: records.series })
}

/// Both phases: search, pick the confined resonance with the highest Q, and
/// analyse its ring-down.
pub fn extract_mode(cfg: &RunConfig, progress: Progress<'_>) -> Result<(SearchOutcome, RingDown)> {
    let search = search_modes(cfg, progress)?;
    let chosen = search
        .select()
        .ok_or_else(|| Error::Extraction("no confined resonance in the search band".into()))?
        .resonance
        .omega;
    let ring = ring_down(cfg, chosen, progress)?;
    Ok((search, ring))
}

pub fn emitter_spec(cfg: &RunConfig, x_offset_nm: f64) -> EmitterSpec {
    let e = &cfg.emitter;
    let two_pi = 2.0 * std::f64::consts::PI;
    EmitterSpec {
        dipole_moment: e.dipole_moment_cm,
        gamma_bulk: two_pi * e.gamma_bulk_ghz * 1e9,
        gamma_nr: two_pi * e.gamma_nr_ghz * 1e9,
        position: (x_offset_nm, e.z_depth_nm),
        orientation: match e.orientation {
            DipoleOrientation::Z => (0.0, 1.0),
            DipoleOrientation::X => (1.0, 0.0),
        },
    }
}

/// `Ez` node of the configured emitter; at the strongest field along its
/// depth line inside the cavity when `at_antinode` is set.
pub fn emitter_node(cfg: &RunConfig, grid: &MaterialGrid, snapshot: &Snapshot) -> Result<((usize, usize), f64)> {
    let depth = cfg.emitter.z_depth_nm;
    if !cfg.emitter.at_antinode {
        let node = grid.emitter_position(cfg.emitter.x_offset_nm, depth)?;
        return Ok((node, cfg.emitter.x_offset_nm));
    }
    let (_, k) = grid.emitter_position(0.0, depth)?;
    let (c0, c1) = grid.cavity_span();
    let c0 = c0.max(1);
    let line: Vec<f64> = (c0..=c1)
        .map(|i| {
            let (ex, ez) = field_at_ez_node(snapshot, i, k);
            ex.norm_sqr() + ez.norm_sqr()
        })
        .collect();
    let i = central_antinode(&line, corner_margin(cfg, grid)).map_or(grid.center_i, |j| c0 + j);
    Ok(((i, k), (i as f64 - grid.center_i as f64) * grid.dx))
}

/// Cavity-QED report for the configured emitter on a ring-down result.
pub fn cqed_report(cfg: &RunConfig, ring: &RingDown) -> Result<(CqedReport, (usize, usize))> {
    let grid = build_grid(&cfg.device_geometry(), cfg.geometry.dx_nm)?;
    let media = cfg.media()?;
    let (node, x) = emitter_node(cfg, &grid, &ring.snapshot)?;
    let fraction = field_fraction(&ring.snapshot, &grid, &media, &ring.volume, node)?;
    let volume = ring.volume.with_width(cfg.emitter.assumed_width_y_nm);
    let report = cqed::report(&ring.record, &volume, &emitter_spec(cfg, x), fraction, media.dielectric.permittivity)?;
    Ok((report, node))
}

/// One position of an emitter map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapEntry {
    pub z_depth_nm: f64,
    pub x_offset_nm: f64,
    pub purcell: Option<f64>,
    pub field_fraction: Option<f64>,
    pub note: Option<String>,
}

/// Purcell factor over emitter positions, evaluated on the stored snapshot.
pub fn emitter_map(cfg: &RunConfig, ring: &RingDown, depths: &[f64], x_offsets: &[f64]) -> Result<Vec<MapEntry>> {
    let grid = build_grid(&cfg.device_geometry(), cfg.geometry.dx_nm)?;
    let media = cfg.media()?;
    let volume = ring.volume.with_width(cfg.emitter.assumed_width_y_nm);
    let lambda = crate::units::HC_EV_NM / ring.record.omega0_ev;
    let mut out = Vec::with_capacity(depths.len() * x_offsets.len());
    for &z in depths {
        for &x in x_offsets {
            let entry = grid
                .emitter_position(x, z)
                .and_then(|node| field_fraction(&ring.snapshot, &grid, &media, &volume, node))
                .and_then(|f| {
                    cqed::purcell_factor(ring.record.q_total, volume.v_mode_nm3, lambda, media.dielectric.index(), f)
                        .map(|p| (p, f))
                });
            out.push(match entry {
                Ok((p, f)) => MapEntry { z_depth_nm: z, x_offset_nm: x, purcell: Some(p), field_fraction: Some(f), note: None },
                Err(e) => MapEntry { z_depth_nm: z, x_offset_nm: x, purcell: None, field_fraction: None, note: Some(e.to_string()) },
            });
        }
    }
    Ok(out)
}

/// Standing-wave antinode of a line cut across the cavity: the prominent
/// peak closest to the middle, ignoring `edge` samples at either end where
/// the groove-corner near field dominates.
pub fn central_antinode(values: &[f64], edge: usize) -> Option<usize> {
    let edge = if values.len() > 2 * edge + 2 { edge } else { 0 };
    let inner = &values[edge..values.len() - edge];
    let mid = (inner.len() as f64 - 1.0) / 2.0;
    peak_indices(inner, 0.2)
        .into_iter()
        .min_by(|&a, &b| (a as f64 - mid).abs().total_cmp(&(b as f64 - mid).abs()))
        .map(|j| j + edge)
}

/// Samples within one groove width of the cavity ends.
fn corner_margin(cfg: &RunConfig, grid: &MaterialGrid) -> usize {
    (cfg.geometry.groove_width_nm / grid.dx).round() as usize
}

/// Whether a resonance carries a flag that disqualifies its Q.
pub fn q_is_reliable(r: &Resonance) -> bool {
    !r.flags.iter().any(|f| matches!(f, ResonanceFlag::QAboveCap | ResonanceFlag::Unresolved))
}
