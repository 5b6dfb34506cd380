//! Orchestrated parameter sweeps over cavity length, emitter placement,
//! metal loss, temperature and grating duty cycle.
//!
//! Every point is keyed by a hash of its configuration; finished points are
//! stored as JSON under `<output>/points/` and skipped when a sweep is re-run.
//! FDTD results are cached separately under `<output>/runs/` so points that
//! differ only in post-processing (emitter placement) share one simulation.

mod protocol;

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use protocol::{
    cqed_report, emitter_map, emitter_node, emitter_spec, extract_mode, no_progress, q_is_reliable, ring_down,
    search_modes, central_antinode, Candidate, MapEntry, Progress, RingDown, SearchOutcome,
    LOCALIZATION_THRESHOLD,
};

use crate::analysis::{standing_wave_profile, ModeRecord, ModeVolume};
use crate::config::RunConfig;
use crate::cqed::{self, CqedReport};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fdtd::Snapshot;
use crate::geometry::build_grid;
use crate::io::{self, num, CsvTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    CavityLength,
    EmitterDepth,
    EmitterX,
    LossFactor,
    Temperature,
    DutyCycle,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 6] = [
        SweepAxis::CavityLength,
        SweepAxis::EmitterDepth,
        SweepAxis::EmitterX,
        SweepAxis::LossFactor,
        SweepAxis::Temperature,
        SweepAxis::DutyCycle,
    ];

    /// CSV column holding the swept value.
    pub fn column(self) -> &'static str {
        match self {
            SweepAxis::CavityLength => "cavity_length_nm",
            SweepAxis::EmitterDepth => "emitter_depth_nm",
            SweepAxis::EmitterX => "emitter_x_nm",
            SweepAxis::LossFactor => "xi",
            SweepAxis::Temperature => "temperature_k",
            SweepAxis::DutyCycle => "duty_cycle",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let v = toml::Value::String(s.replace('-', "_"));
        SweepAxis::deserialize(v).map_err(|_| Error::config("sweep.axis", format!("unknown axis `{s}`")))
    }

    /// Loss and temperature scans keep the mode frequency of the base run.
    pub fn holds_frequency(self) -> bool {
        matches!(self, SweepAxis::LossFactor | SweepAxis::Temperature)
    }
}

/// Values must be nonempty, strictly monotone and inside the axis bounds.
pub fn check_axis_values(axis: SweepAxis, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Domain("sweep needs at least one value".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("sweep values must be finite".into()));
    }
    let up = values.windows(2).all(|w| w[1] > w[0]);
    let down = values.windows(2).all(|w| w[1] < w[0]);
    if !(up || down) {
        return Err(Error::Domain("sweep values must be strictly monotone".into()));
    }
    let ok = match axis {
        SweepAxis::CavityLength | SweepAxis::EmitterDepth | SweepAxis::Temperature => values.iter().all(|&v| v > 0.0),
        SweepAxis::EmitterX => true,
        SweepAxis::LossFactor => values.iter().all(|&v| v >= 1.0),
        SweepAxis::DutyCycle => values.iter().all(|&v| v > 0.0 && v < 1.0),
    };
    if !ok {
        return Err(Error::Domain(format!("value out of range for axis {}", axis.column())));
    }
    Ok(())
}

/// Configuration of one sweep point.
pub fn apply_axis(base: &RunConfig, axis: SweepAxis, value: f64) -> Result<RunConfig> {
    let mut cfg = base.clone();
    match axis {
        SweepAxis::CavityLength => cfg.geometry.cavity_length_nm = value,
        SweepAxis::EmitterDepth => cfg.emitter.z_depth_nm = value,
        SweepAxis::EmitterX => {
            cfg.emitter.at_antinode = false;
            cfg.emitter.x_offset_nm = value;
        }
        SweepAxis::LossFactor => cfg.metal.loss_factor = value,
        SweepAxis::Temperature => cfg.metal.loss_factor = base.temperature_table()?.to_loss_factor(value)?,
        SweepAxis::DutyCycle => cfg.geometry.groove_width_nm = value * cfg.geometry.period_nm,
    }
    cfg.sweep.values = vec![value];
    cfg.validate()?;
    Ok(cfg)
}

/// Hash of the parts of a configuration that influence the FDTD runs.
pub fn simulation_hash(cfg: &RunConfig, fixed_omega: Option<f64>) -> String {
    let mut c = cfg.clone();
    c.emitter = Default::default();
    c.sweep = Default::default();
    c.fdtd.execution = Execution::default();
    let mut key = c.content_hash();
    if let Some(w) = fixed_omega {
        key.push_str(&format!("-w{:016x}", w.to_bits()));
    }
    key
}

/// Hash of a point configuration (sweep section excluded).
pub fn point_hash(cfg: &RunConfig, fixed_omega: Option<f64>) -> String {
    let mut c = cfg.clone();
    c.sweep = Default::default();
    c.fdtd.execution = Execution::default();
    let mut key = c.content_hash();
    if let Some(w) = fixed_omega {
        key.push_str(&format!("-w{:016x}", w.to_bits()));
    }
    key
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub base_config: RunConfig,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub outputs: PathBuf,
}

impl SweepPlan {
    pub fn from_config(cfg: &RunConfig) -> Self {
        Self {
            base_config: cfg.clone(),
            axis: cfg.sweep.axis,
            values: cfg.sweep.values.clone(),
            outputs: cfg.sweep.output.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.base_config.validate()?;
        check_axis_values(self.axis, &self.values).map_err(|e| Error::config("sweep.values", e.to_string()))?;
        for &v in &self.values {
            apply_axis(&self.base_config, self.axis, v)
                .map_err(|e| Error::config("sweep.values", format!("value {v}: {e}")))?;
        }
        Ok(())
    }
}

/// Stored FDTD outcome of one simulation configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachedRun {
    pub search: Option<SearchOutcome>,
    pub record: ModeRecord,
    pub volume: ModeVolume,
    pub ringdown_omega: f64,
    pub ringdown_q: f64,
    pub steps: usize,
    pub grid_dims: (usize, usize),
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub axis: SweepAxis,
    pub value: f64,
    pub config_hash: String,
    pub simulation_hash: String,
    pub status: PointStatus,
    pub error: Option<String>,
    pub xi: f64,
    pub temperature_k: Option<f64>,
    pub candidates: Vec<Candidate>,
    pub mode: Option<ModeRecord>,
    pub volume: Option<ModeVolume>,
    pub cqed: Option<CqedReport>,
    pub emitter_node: Option<(usize, usize)>,
    /// No ring-down resonance within half a reference linewidth.
    pub mode_lost: bool,
    /// Loss scans only: mode perturbed relative to the reference.
    pub perturbed: Option<bool>,
}

fn snapshot_paths(dir: &Path, hash: &str) -> (PathBuf, PathBuf) {
    (dir.join(format!("{hash}.ex.bin")), dir.join(format!("{hash}.ez.bin")))
}

fn save_snapshot(dir: &Path, hash: &str, snap: &Snapshot, pml: usize, dx: f64) -> Result<()> {
    let (px, pz) = snapshot_paths(dir, hash);
    io::write_file(&px, &io::snapshot_bytes(snap.nx, snap.nz, dx, pml, io::TAG_EX, &snap.ex))?;
    io::write_file(&pz, &io::snapshot_bytes(snap.nx, snap.nz, dx, pml, io::TAG_EZ, &snap.ez))
}

/// Loads a stored mode snapshot.
pub fn load_snapshot(dir: &Path, hash: &str, omega: f64) -> Result<Snapshot> {
    let (px, pz) = snapshot_paths(dir, hash);
    let read = |p: &Path| std::fs::read(p).map_err(|e| Error::io(p, e));
    let (hx, ex) = io::parse_snapshot(&read(&px)?)?;
    let (_, ez) = io::parse_snapshot(&read(&pz)?)?;
    Ok(Snapshot {
        name: "mode".into(),
        omega,
        nx: hx.nx,
        nz: hx.nz,
        ex,
        ez,
        samples: 0,
    })
}

/// Runs (or loads) the simulation for `cfg`: the full two-phase protocol, or
/// only the ring-down at `fixed_omega` when given.
pub fn run_cached(cfg: &RunConfig, fixed_omega: Option<f64>, cache_dir: Option<&Path>, progress: Progress<'_>) -> Result<(CachedRun, RingDown)> {
    let hash = simulation_hash(cfg, fixed_omega);
    if let Some(dir) = cache_dir {
        let path = dir.join(format!("{hash}.json"));
        if path.exists() {
            let cached: CachedRun = io::read_json(&path)?;
            let snapshot = load_snapshot(dir, &hash, cached.record.omega0)?;
            let grid = build_grid(&cfg.device_geometry(), cfg.geometry.dx_nm)?;
            let cut = standing_wave_profile(&snapshot, &grid, cfg.monitors.profile_depth_nm)?;
            let resonance = crate::analysis::Resonance {
                omega: cached.ringdown_omega,
                decay_rate: cached.ringdown_omega / (2.0 * cached.ringdown_q),
                q: cached.ringdown_q,
                q_spectral: None,
                amplitude: 1.0,
                flags: Vec::new(),
            };
            let ring = RingDown {
                record: cached.record.clone(),
                volume: cached.volume.clone(),
                cut,
                snapshot,
                resonance,
                steps: cached.steps,
                series: Vec::new(),
            };
            return Ok((cached, ring));
        }
    }
    let start = Instant::now();
    let (search, ring) = match fixed_omega {
        Some(w) => (None, ring_down(cfg, w, progress)?),
        None => {
            let (s, r) = extract_mode(cfg, progress)?;
            (Some(s), r)
        }
    };
    let steps = ring.steps + search.as_ref().map_or(0, |s| s.steps);
    let cached = CachedRun {
        search,
        record: ring.record.clone(),
        volume: ring.volume.clone(),
        ringdown_omega: ring.resonance.omega,
        ringdown_q: ring.resonance.q,
        steps,
        grid_dims: (ring.snapshot.nx, ring.snapshot.nz),
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    if let Some(dir) = cache_dir {
        let pml = cfg.fdtd.pml_cells;
        save_snapshot(dir, &hash, &ring.snapshot, pml, cfg.geometry.dx_nm)?;
        io::write_json(&dir.join(format!("{hash}.json")), &cached)?;
    }
    Ok((cached, ring))
}

/// Reference mode of a loss or temperature scan.
#[derive(Debug, Clone)]
struct Reference {
    omega0: f64,
    q_total: f64,
    q_rad: f64,
    v: f64,
}

fn unfinished_point(plan: &SweepPlan, value: f64) -> PointReport {
    PointReport {
        axis: plan.axis,
        value,
        config_hash: String::new(),
        simulation_hash: String::new(),
        status: PointStatus::Failed,
        error: None,
        xi: plan.base_config.metal.loss_factor,
        temperature_k: None,
        candidates: Vec::new(),
        mode: None,
        volume: None,
        cqed: None,
        emitter_node: None,
        mode_lost: false,
        perturbed: None,
    }
}

fn run_point(plan: &SweepPlan, value: f64, reference: Option<&Reference>, progress: Progress<'_>) -> PointReport {
    let runs = plan.outputs.join("runs");
    let fixed = reference.map(|r| r.omega0);
    let mut report = unfinished_point(plan, value);
    let outcome = (|| -> Result<()> {
        let cfg = apply_axis(&plan.base_config, plan.axis, value)?;
        report.config_hash = point_hash(&cfg, fixed);
        report.simulation_hash = simulation_hash(&cfg, fixed);
        report.xi = cfg.metal.loss_factor;
        report.temperature_k = match plan.axis {
            SweepAxis::Temperature => Some(value),
            _ => cfg.temperature_table()?.to_temperature(cfg.metal.loss_factor).ok(),
        };
        let (cached, ring) = run_cached(&cfg, fixed, Some(&runs), progress)?;
        let (cq, node) = cqed_report(&cfg, &ring)?;
        if let Some(r) = reference {
            report.mode_lost = (ring.resonance.omega - r.omega0).abs() > r.omega0 / (2.0 * r.q_total);
            report.perturbed = Some(cqed::is_perturbed(
                ring.record.q_total,
                ring.record.q_abs,
                ring.record.q_rad,
                ring.record.v_mode_per_width_nm2,
                r.q_rad,
                r.v,
            ));
        }
        report.candidates = cached.search.map(|s| s.candidates).unwrap_or_default();
        report.mode = Some(ring.record);
        report.volume = Some(ring.volume.with_width(cfg.emitter.assumed_width_y_nm));
        report.cqed = Some(cq);
        report.emitter_node = Some(node);
        report.status = PointStatus::Ok;
        Ok(())
    })();
    if let Err(e) = outcome {
        report.error = Some(e.to_string());
    }
    report
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub config_hash: String,
    pub code_version: String,
    pub grid_dims: Option<(usize, usize)>,
    pub wall_seconds: f64,
    pub points_ok: usize,
    pub points_failed: usize,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub points: Vec<PointReport>,
    pub table: CsvTable,
    pub manifest: Manifest,
}

fn execute<T: Sync, R: Send>(workers: usize, exec: Execution, items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    #[cfg(feature = "parallel")]
    if workers > 1 && exec.is_parallel() {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            return pool.install(|| crate::exec::map_collect(Execution::Parallel, items, f));
        }
    }
    let _ = (workers, exec);
    items.iter().map(f).collect()
}

/// Runs every point of `plan`, reusing stored points, and writes `sweep.csv`,
/// per-point JSON and `manifest.json` under the plan's output directory.
pub fn run_sweep(plan: &SweepPlan, progress: Progress<'_>) -> Result<SweepOutcome> {
    run_sweep_until(plan, progress, &AtomicBool::new(false))
}

/// [`run_sweep`] that starts no new point once `stop` is set. Finished points
/// are already on disk, so an interrupted sweep resumes where it left off.
pub fn run_sweep_until(plan: &SweepPlan, progress: Progress<'_>, stop: &AtomicBool) -> Result<SweepOutcome> {
    plan.validate()?;
    let start = Instant::now();
    let points_dir = plan.outputs.join("points");
    std::fs::create_dir_all(&points_dir).map_err(|e| Error::io(&points_dir, e))?;

    let reference = if plan.axis.holds_frequency() {
        let (cached, ring) = run_cached(&plan.base_config, None, Some(&plan.outputs.join("runs")), progress)?;
        Some(Reference {
            omega0: ring.record.omega0,
            q_total: cached.record.q_total,
            q_rad: cached.record.q_rad,
            v: cached.record.v_mode_per_width_nm2,
        })
    } else {
        None
    };
    let fixed = reference.as_ref().map(|r| r.omega0);

    let cfg = &plan.base_config;
    let points = execute(cfg.sweep.workers, cfg.fdtd.execution, &plan.values, |&value| {
        let key = apply_axis(cfg, plan.axis, value).map(|c| point_hash(&c, fixed));
        if let Ok(key) = &key {
            let path = points_dir.join(format!("{key}.json"));
            if let Ok(done) = io::read_json::<PointReport>(&path) {
                if done.status == PointStatus::Ok {
                    return done;
                }
            }
        }
        if stop.load(Ordering::Relaxed) {
            let mut skipped = unfinished_point(plan, value);
            skipped.error = Some("interrupted".into());
            return skipped;
        }
        let report = run_point(plan, value, reference.as_ref(), progress);
        if report.status == PointStatus::Ok {
            let _ = io::write_json(&points_dir.join(format!("{}.json", report.config_hash)), &report);
        }
        report
    });

    let ok = points.iter().filter(|p| p.status == PointStatus::Ok).count();
    let table = sweep_table(&points);
    table.write(&plan.outputs.join("sweep.csv"))?;
    let grid_dims = build_grid(&cfg.device_geometry(), cfg.geometry.dx_nm).ok().map(|g| (g.nx, g.nz));
    let manifest = Manifest {
        axis: plan.axis,
        values: plan.values.clone(),
        config_hash: cfg.content_hash(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        grid_dims,
        wall_seconds: start.elapsed().as_secs_f64(),
        points_ok: ok,
        points_failed: points.len() - ok,
    };
    io::write_json(&plan.outputs.join("manifest.json"), &manifest)?;
    io::write_json(&plan.outputs.join("plan.json"), plan)?;
    if ok == 0 {
        let first = points.iter().find_map(|p| p.error.clone()).unwrap_or_default();
        return Err(Error::Extraction(format!("every sweep point failed; first error: {first}")));
    }
    Ok(SweepOutcome { points, table, manifest })
}

/// Consolidated table, one row per point.
pub fn sweep_table(points: &[PointReport]) -> CsvTable {
    let axis = points.first().map_or("value", |p| p.axis.column());
    let mut t = CsvTable::new([
        axis,
        "omega0_ev",
        "omega0_over_omega_p",
        "xi",
        "temperature_k",
        "q_rad",
        "q_abs",
        "q_total",
        "purcell_per_um",
        "g_ghz",
        "kappa_ghz",
        "strong_coupling",
        "q_ringdown",
        "purcell_at_y",
        "v_mode_per_width_nm2",
        "decay_z_nm",
        "peak_count",
        "mode_lost",
        "perturbed",
        "status",
    ]);
    let ghz = crate::units::omega_to_ghz;
    for p in points {
        let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
        let m = p.mode.as_ref();
        let c = p.cqed.as_ref();
        t.push(vec![
            num(p.value),
            opt(m.map(|m| m.omega0_ev)),
            opt(m.map(|m| m.omega0_over_omega_p)),
            num(p.xi),
            opt(p.temperature_k),
            opt(m.map(|m| m.q_rad)),
            opt(m.map(|m| m.q_abs)),
            opt(m.map(|m| m.q_total)),
            opt(c.map(|c| c.purcell_per_um)),
            opt(c.map(|c| ghz(c.g))),
            opt(c.map(|c| ghz(c.kappa))),
            c.map(|c| c.strong_coupling.to_string()).unwrap_or_default(),
            opt(m.map(|m| m.q_ringdown)),
            opt(c.map(|c| c.purcell_at_width)),
            opt(m.map(|m| m.v_mode_per_width_nm2)),
            opt(m.and_then(|m| m.decay_z_nm)),
            m.map(|m| m.peak_count.to_string()).unwrap_or_default(),
            p.mode_lost.to_string(),
            p.perturbed.map(|b| b.to_string()).unwrap_or_default(),
            match p.status {
                PointStatus::Ok => "ok".into(),
                PointStatus::Failed => format!("failed: {}", p.error.clone().unwrap_or_default()),
            },
        ]);
    }
    t
}

/// Regenerates plot-ready tables from the stored point reports of a sweep
/// directory. Returns the names of the files written.
pub fn write_report(dir: &Path) -> Result<Vec<String>> {
    let points_dir = dir.join("points");
    let entries = std::fs::read_dir(&points_dir).map_err(|e| Error::io(&points_dir, e))?;
    let plan: Option<SweepPlan> = io::read_json(&dir.join("plan.json")).ok();
    let mut points: Vec<PointReport> = Vec::new();
    for e in entries {
        let path = e.map_err(|e| Error::io(&points_dir, e))?.path();
        if path.extension().is_some_and(|x| x == "json") {
            points.push(io::read_json(&path)?);
        }
    }
    if let Some(plan) = &plan {
        points.retain(|p| p.axis == plan.axis && plan.values.contains(&p.value));
    }
    points.sort_by(|a, b| a.value.total_cmp(&b.value));
    let mut written = Vec::new();
    let mut emit = |name: &str, t: CsvTable| -> Result<()> {
        t.write(&dir.join(name))?;
        written.push(name.to_string());
        Ok(())
    };
    let axis = points.first().map(|p| p.axis);
    match axis {
        Some(SweepAxis::CavityLength) => {
            let mut a = CsvTable::new(["cavity_length_nm", "omega0_over_omega_p", "q", "localized"]);
            let mut b = CsvTable::new(["cavity_length_nm", "q"]);
            for p in &points {
                for c in &p.candidates {
                    a.push(vec![
                        num(p.value),
                        num(crate::units::omega_to_ev(c.resonance.omega) / plasma_ev(p)),
                        num(c.resonance.q),
                        c.localized.to_string(),
                    ]);
                }
                if let Some(m) = &p.mode {
                    b.push(vec![num(p.value), num(m.q_total)]);
                }
            }
            emit("fig2a.csv", a)?;
            emit("fig2b.csv", b)?;
        }
        Some(SweepAxis::LossFactor) | Some(SweepAxis::Temperature) => {
            let mut a = CsvTable::new(["xi", "purcell"]);
            let mut b = CsvTable::new(["temperature_k", "purcell"]);
            for p in &points {
                if let Some(c) = &p.cqed {
                    a.push(vec![num(p.xi), num(c.purcell_at_width)]);
                    if let Some(t) = p.temperature_k {
                        b.push(vec![num(t), num(c.purcell_at_width)]);
                    }
                }
            }
            emit("fig4a.csv", a)?;
            emit("fig4b.csv", b)?;
        }
        Some(SweepAxis::EmitterDepth) | Some(SweepAxis::EmitterX) => {
            let mut a = CsvTable::new([axis.unwrap().column(), "purcell", "field_fraction"]);
            for p in &points {
                if let Some(c) = &p.cqed {
                    a.push(vec![num(p.value), num(c.purcell_at_width), num(c.field_fraction)]);
                }
            }
            emit("fig3.csv", a)?;
        }
        Some(SweepAxis::DutyCycle) | None => {}
    }
    emit("sweep.csv", sweep_table(&points))?;
    Ok(written)
}

fn plasma_ev(p: &PointReport) -> f64 {
    p.mode
        .as_ref()
        .map(|m| m.omega0_ev / m.omega0_over_omega_p)
        .unwrap_or(8.8)
}
