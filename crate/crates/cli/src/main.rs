//! `plasmon-dbr`: command-line driver.
//!
//! Any `--section.key value` flag overrides the matching config entry, e.g.
//! `--geometry.cavity-length-nm 328`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use clap::{Parser, Subcommand};
use plasmon_dbr::config::RunConfig;
use plasmon_dbr::error::{Error, Result};
use plasmon_dbr::experiments::{self, SweepAxis, SweepPlan};
use plasmon_dbr::geometry::build_grid;
use plasmon_dbr::io::{self, num, CsvTable};
use plasmon_dbr::materials::{design_grating_period, sp_wavevector};
use plasmon_dbr::units::ev_to_omega;

#[derive(Parser, Debug)]
#[command(name = "plasmon-dbr", version, about = "Plasmonic DBR cavity simulator")]
struct Cli {
    /// Suppress progress and warnings.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Surface-plasmon dispersion and Bragg period table.
    Dispersion {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Single photon energy instead of a band.
        #[arg(long)]
        energy_ev: Option<f64>,
        #[arg(long, default_value_t = 0.8)]
        from_ev: f64,
        #[arg(long, default_value_t = 1.6)]
        to_ev: f64,
        #[arg(long, default_value_t = 17)]
        points: usize,
        /// Write the table here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Two-phase mode extraction for one configuration.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "runs/simulate")]
        output: PathBuf,
        /// Validate and report grid size without running or writing.
        #[arg(long)]
        dry_run: bool,
    },
    /// Parameter sweep along one axis.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// cavity-length, emitter-depth, emitter-x, loss-factor, temperature or duty-cycle.
        #[arg(long)]
        axis: Option<String>,
        /// Comma-separated values, or `start:stop:step`.
        #[arg(long)]
        values: Option<String>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Regenerate plot-ready tables from a finished sweep directory.
    Report { dir: PathBuf },
    /// Configuration helpers.
    Config {
        #[command(subcommand)]
        action: ConfigAction,
    },
    /// Check a configuration and exit.
    Validate {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum ConfigAction {
    /// Print the full default configuration.
    DumpDefaults,
}

/// Splits `--section.key value` / `--section.key=value` overrides from the
/// arguments clap handles.
fn split_overrides(args: Vec<String>) -> std::result::Result<(Vec<String>, Vec<(String, String)>), String> {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let dotted = arg.strip_prefix("--").filter(|name| name.split('=').next().is_some_and(|n| n.contains('.')));
        match dotted {
            Some(flag) => match flag.split_once('=') {
                Some((k, v)) => overrides.push((k.to_string(), v.to_string())),
                None => match it.next() {
                    Some(v) => overrides.push((flag.to_string(), v)),
                    None => return Err(format!("missing value for --{flag}")),
                },
            },
            None => rest.push(arg),
        }
    }
    Ok((rest, overrides))
}

fn load_config(path: Option<&Path>, overrides: &[(String, String)]) -> Result<RunConfig> {
    let base = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let cfg = base.with_overrides(overrides.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Terminal status line with step rate and remaining time.
struct StatusLine {
    quiet: bool,
    state: Mutex<(String, Instant, Instant)>,
}

impl StatusLine {
    fn new(quiet: bool) -> Self {
        let now = Instant::now();
        Self {
            quiet,
            state: Mutex::new((String::new(), now, now)),
        }
    }

    fn update(&self, stage: &str, done: usize, total: usize) {
        if self.quiet {
            return;
        }
        let mut st = self.state.lock().unwrap();
        let now = Instant::now();
        if st.0 != stage || done == 0 {
            *st = (stage.to_string(), now, now);
        }
        if done < total && now.duration_since(st.2).as_secs_f64() < 0.5 {
            return;
        }
        st.2 = now;
        let elapsed = now.duration_since(st.1).as_secs_f64().max(1e-9);
        let rate = done as f64 / elapsed;
        let eta = if rate > 0.0 { (total - done) as f64 / rate } else { 0.0 };
        eprint!("\r{stage}: {done}/{total} steps, {rate:.0} steps/s, {eta:.0} s left   ");
        if done >= total {
            eprintln!();
        }
    }
}

fn warn(quiet: bool, msg: &str) {
    if !quiet {
        eprintln!("warning: {msg}");
    }
}

fn dispersion_table(cfg: &RunConfig, energies: &[f64], quiet: bool) -> Result<CsvTable> {
    let metal = cfg.material()?;
    let diel = cfg.dielectric()?;
    let mut t = CsvTable::new([
        "energy_ev",
        "eps_m_re",
        "eps_m_im",
        "n_eff",
        "k_sp_re_per_um",
        "k_sp_im_per_um",
        "period_nm",
        "flag",
    ]);
    for &e in energies {
        let w = ev_to_omega(e);
        let eps = metal.permittivity_at(w)?;
        let row = match (sp_wavevector(&metal, &diel, w), design_grating_period(&metal, &diel, e)) {
            (Ok(k), Ok(a)) => vec![
                num(k.re / w * plasmon_dbr::units::C0),
                num(k.re * 1e-6),
                num(k.im * 1e-6),
                num(a),
                String::new(),
            ],
            (Ok(k), Err(err)) => {
                warn(quiet, &format!("{e} eV: {err}"));
                vec![num(k.re / w * plasmon_dbr::units::C0), num(k.re * 1e-6), num(k.im * 1e-6), String::new(), err.kind().into()]
            }
            (Err(err), _) => {
                warn(quiet, &format!("{e} eV: {err}"));
                vec![String::new(), String::new(), String::new(), String::new(), err.kind().into()]
            }
        };
        let mut full = vec![num(e), num(eps.re), num(eps.im)];
        full.extend(row);
        t.push(full);
    }
    Ok(t)
}

fn emit(table: &CsvTable, output: Option<&Path>) -> Result<()> {
    match output {
        Some(p) => table.write(p),
        None => {
            print!("{}", table.render());
            Ok(())
        }
    }
}

fn parse_values(spec: &str) -> Result<Vec<f64>> {
    let bad = |m: &str| Error::config("sweep.values", format!("`{spec}`: {m}"));
    if let Some((a, rest)) = spec.split_once(':') {
        let parts: Vec<&str> = std::iter::once(a).chain(rest.split(':')).collect();
        if parts.len() != 3 {
            return Err(bad("range needs start:stop:step"));
        }
        let v: Vec<f64> = parts.iter().map(|p| p.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| bad("not a number"))?;
        let (start, stop, step) = (v[0], v[1], v[2]);
        if !(step != 0.0) || (stop - start) / step < 0.0 {
            return Err(bad("step does not reach stop"));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
        return Ok((0..n).map(|j| start + step * j as f64).collect());
    }
    spec.split(',').map(|p| p.trim().parse::<f64>().map_err(|_| bad("not a number"))).collect()
}

fn memory_estimate_bytes(nx: usize, nz: usize) -> usize {
    // eight f64 field/PML arrays, four f64 coefficient arrays, two complex
    // DFT arrays and the cell map
    nx * nz * (12 * 8 + 2 * 16 + 1)
}

fn simulate(cfg: &RunConfig, output: &Path, dry_run: bool, status: &StatusLine) -> Result<()> {
    let grid = build_grid(&cfg.device_geometry(), cfg.geometry.dx_nm)?;
    if dry_run {
        let mem = memory_estimate_bytes(grid.nx, grid.nz);
        println!("grid {} x {} cells at {} nm ({} metal cells)", grid.nx, grid.nz, grid.dx, grid.metal_cell_count());
        println!("memory estimate {:.1} MiB", mem as f64 / (1024.0 * 1024.0));
        println!("config hash {}", cfg.content_hash());
        return Ok(());
    }
    let start = Instant::now();
    let progress = |s: &str, d: usize, n: usize| status.update(s, d, n);
    let (search, ring) = experiments::extract_mode(cfg, &progress)?;
    let (cqed, node) = experiments::cqed_report(cfg, &ring)?;
    std::fs::create_dir_all(output).map_err(|e| Error::io(output, e))?;

    let mut cands = CsvTable::new(["energy_ev", "omega_over_omega_p", "q", "q_spectral", "localization", "localized", "in_gap_window", "flags"]);
    let ep = cfg.metal.plasma_energy_ev;
    for c in &search.candidates {
        cands.push(vec![
            num(c.resonance.energy_ev()),
            num(c.resonance.energy_ev() / ep),
            num(c.resonance.q),
            c.resonance.q_spectral.map(num).unwrap_or_default(),
            num(c.localization),
            c.localized.to_string(),
            c.in_gap_window.to_string(),
            c.resonance.flags.iter().map(|f| format!("{f:?}")).collect::<Vec<_>>().join(" "),
        ]);
    }
    cands.write(&output.join("candidates.csv"))?;
    ring.cut.to_csv().write(&output.join("line_cut.csv"))?;
    let series_dir = output.join("series");
    for s in &ring.series {
        s.to_csv().write(&series_dir.join(format!("{}.csv", s.name)))?;
    }
    let pml = cfg.fdtd.pml_cells;
    let snap = &ring.snapshot;
    io::write_file(&output.join("mode.ex.bin"), &io::snapshot_bytes(snap.nx, snap.nz, grid.dx, pml, io::TAG_EX, &snap.ex))?;
    io::write_file(&output.join("mode.ez.bin"), &io::snapshot_bytes(snap.nx, snap.nz, grid.dx, pml, io::TAG_EZ, &snap.ez))?;

    let depths = [10.0, 20.0, 30.0, 40.0];
    let half = 0.5 * cfg.geometry.cavity_length_nm;
    let xs: Vec<f64> = (0..)
        .map(|j| -half + j as f64 * grid.dx)
        .take_while(|&x| x <= half)
        .collect();
    let map = experiments::emitter_map(cfg, &ring, &depths, &xs)?;
    let mut mt = CsvTable::new(["z_depth_nm", "x_offset_nm", "purcell", "field_fraction"]);
    for m in &map {
        mt.push(vec![num(m.z_depth_nm), num(m.x_offset_nm), m.purcell.map(num).unwrap_or_default(), m.field_fraction.map(num).unwrap_or_default()]);
    }
    mt.write(&output.join("emitter_map.csv"))?;

    let report = serde_json::json!({
        "mode": ring.record,
        "volume": ring.volume.with_width(cfg.emitter.assumed_width_y_nm),
        "cqed": cqed,
        "emitter_node": node,
        "bragg_energy_ev": search.bragg_energy_ev,
        "candidates": search.candidates,
    });
    io::write_json(&output.join("mode.json"), &report)?;
    std::fs::write(output.join("config.toml"), cfg.to_toml()).map_err(|e| Error::io(output.join("config.toml"), e))?;
    let manifest = serde_json::json!({
        "config_hash": cfg.content_hash(),
        "code_version": env!("CARGO_PKG_VERSION"),
        "grid_dims": [grid.nx, grid.nz],
        "steps": search.steps + ring.steps,
        "wall_seconds": start.elapsed().as_secs_f64(),
    });
    io::write_json(&output.join("manifest.json"), &manifest)?;
    println!(
        "mode {:.4} eV ({:.4} wp), Q {:.0} (rad {:.0}, abs {:.0}), V/Y {:.0} nm^2, F(Y={} nm) {:.1}, g/2pi {:.1} GHz",
        ring.record.omega0_ev,
        ring.record.omega0_over_omega_p,
        ring.record.q_total,
        ring.record.q_rad,
        ring.record.q_abs,
        ring.record.v_mode_per_width_nm2,
        cqed.assumed_width_y_nm,
        cqed.purcell_at_width,
        cqed.g / (2.0 * std::f64::consts::PI * 1e9),
    );
    Ok(())
}

fn sweep(cfg: RunConfig, status: &StatusLine, stop: &AtomicBool) -> Result<()> {
    let plan = SweepPlan::from_config(&cfg);
    let progress = |s: &str, d: usize, n: usize| status.update(s, d, n);
    let outcome = experiments::run_sweep_until(&plan, &progress, stop)?;
    let failed = outcome.manifest.points_failed;
    if failed > 0 {
        warn(status.quiet, &format!("{failed} of {} points failed; see sweep.csv", outcome.points.len()));
    }
    println!("{} points written to {}", outcome.manifest.points_ok, plan.outputs.display());
    Ok(())
}

fn run(cli: Cli, overrides: &[(String, String)]) -> Result<()> {
    let status = StatusLine::new(cli.quiet);
    match cli.command {
        Command::Dispersion { config, energy_ev, from_ev, to_ev, points, output } => {
            let cfg = load_config(config.as_deref(), overrides)?;
            let energies: Vec<f64> = match energy_ev {
                Some(e) => vec![e],
                None => {
                    if points < 2 || !(to_ev > from_ev) || !(from_ev > 0.0) {
                        return Err(Error::config("dispersion", "band needs 0 < from-ev < to-ev and at least 2 points"));
                    }
                    (0..points).map(|j| from_ev + (to_ev - from_ev) * j as f64 / (points - 1) as f64).collect()
                }
            };
            emit(&dispersion_table(&cfg, &energies, cli.quiet)?, output.as_deref())
        }
        Command::Simulate { config, output, dry_run } => {
            let cfg = load_config(config.as_deref(), overrides)?;
            simulate(&cfg, &output, dry_run, &status)
        }
        Command::Sweep { config, axis, values, output } => {
            let mut cfg = load_config(config.as_deref(), overrides)?;
            if let Some(a) = axis {
                cfg.sweep.axis = SweepAxis::parse(&a)?;
            }
            if let Some(v) = values {
                cfg.sweep.values = parse_values(&v)?;
            }
            if let Some(o) = output {
                cfg.sweep.output = o;
            }
            cfg.validate()?;
            let stop = Arc::new(AtomicBool::new(false));
            let flag = stop.clone();
            let quiet = cli.quiet;
            // a second interrupt falls through to the default handler
            let _ = ctrlc::set_handler(move || {
                if flag.swap(true, Ordering::SeqCst) {
                    std::process::exit(130);
                }
                if !quiet {
                    eprintln!("\ninterrupt: finishing running points, no new points start");
                }
            });
            sweep(cfg, &status, &stop)
        }
        Command::Report { dir } => {
            let written = experiments::write_report(&dir)?;
            for w in written {
                println!("{}", dir.join(w).display());
            }
            Ok(())
        }
        Command::Config { action: ConfigAction::DumpDefaults } => {
            print!("{}", RunConfig::default().to_toml());
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = load_config(config.as_deref(), overrides)?;
            let grid = build_grid(&cfg.device_geometry(), cfg.geometry.dx_nm)?;
            if !cli.quiet {
                println!("ok: grid {} x {} cells, config hash {}", grid.nx, grid.nz, cfg.content_hash());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let (args, overrides) = match split_overrides(args) {
        Ok(v) => v,
        Err(msg) => {
            report_error(&Error::config("arguments", msg));
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(args);
    match run(cli, &overrides) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report_error(&e);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn report_error(e: &Error) {
    let mut body = serde_json::json!({
        "error": e.kind(),
        "message": e.to_string(),
        "exit_code": e.exit_code(),
    });
    if let Error::Config { path, .. } = e {
        body["path"] = serde_json::Value::String(path.clone());
    }
    eprintln!("{body}");
}
