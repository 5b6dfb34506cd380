//! Run configuration: a single TOML document with an explicit schema version.
//!
//! Unknown keys are rejected with the dotted path of the offending entry, and
//! every default is visible through [`RunConfig::default`] (serialized by
//! `config dump-defaults`).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::experiments::SweepAxis;
use crate::fdtd::{FdtdSettings, Media, SourceKind};
use crate::geometry::DeviceGeometry;
use crate::materials::{Dielectric, DrudeMaterial, XiTemperatureTable, SILVER_RRR};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub version: String,
    pub metal: MetalConfig,
    pub dielectric: DielectricConfig,
    /// `[temperature_k, xi]` anchors; the built-in silver table when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi_temperature_table: Option<Vec<[f64; 2]>>,
    pub geometry: GeometryConfig,
    pub fdtd: FdtdConfig,
    pub source: SourceConfig,
    pub monitors: MonitorConfig,
    pub emitter: EmitterConfig,
    pub sweep: SweepConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetalConfig {
    pub eps_inf: f64,
    pub plasma_energy_ev: f64,
    /// Room-temperature damping energy.
    pub damping_energy_ev: f64,
    pub loss_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DielectricConfig {
    pub permittivity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub period_nm: f64,
    pub groove_width_nm: f64,
    pub groove_depth_nm: f64,
    pub metal_thickness_nm: f64,
    pub cavity_length_nm: f64,
    pub dbr_periods: usize,
    pub dx_nm: f64,
    pub substrate_height_nm: f64,
    pub air_height_nm: f64,
    pub slab_overhang_nm: f64,
    pub side_margin_nm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FdtdConfig {
    pub dt_safety: f64,
    pub pml_cells: usize,
    pub pml_order: f64,
    pub pml_reflection: f64,
    pub pml_alpha: f64,
    /// Broadband search record after source turn-off, in optical periods of
    /// the search centre.
    pub search_periods: f64,
    /// Ring-down record after source turn-off, in periods of the mode.
    pub duration_periods: f64,
    pub execution: Execution,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DipoleOrientation {
    Z,
    X,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourceConfig {
    pub orientation: DipoleOrientation,
    pub x_offset_nm: f64,
    pub z_depth_nm: f64,
    pub search_center_ev: f64,
    /// Spectral FWHM of the search pulse.
    pub search_bandwidth_ev: f64,
    /// Spectral FWHM of the ring-down pulse relative to the mode frequency.
    pub ringdown_bandwidth_fraction: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonitorConfig {
    pub band_ev: [f64; 2],
    pub probe_depth_nm: f64,
    /// Probe x positions as fractions of the half cavity length.
    pub probe_fractions: Vec<f64>,
    pub probe_cadence: usize,
    pub energy_cadence: usize,
    pub snapshot_samples_per_period: usize,
    /// Share of the post-source ring-down used by the fits.
    pub fit_fraction: f64,
    /// Depth of the cavity box used for the energy-domain sensitivity.
    pub cavity_box_depth_nm: f64,
    /// Depth of the line cut used for peak counting.
    pub profile_depth_nm: f64,
    /// Half width of the window around the Bragg energy of the grating,
    /// relative, inside which a resonance counts as a cavity mode.
    pub bragg_window: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmitterConfig {
    pub dipole_moment_cm: f64,
    /// Bulk emitter decay rate `gamma / 2 pi`.
    pub gamma_bulk_ghz: f64,
    pub gamma_nr_ghz: f64,
    pub z_depth_nm: f64,
    /// Place the emitter at the intensity maximum along its depth line.
    pub at_antinode: bool,
    /// Used when `at_antinode` is false.
    pub x_offset_nm: f64,
    pub orientation: DipoleOrientation,
    pub assumed_width_y_nm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub workers: usize,
    pub output: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            version: SCHEMA_VERSION.into(),
            metal: MetalConfig::default(),
            dielectric: DielectricConfig::default(),
            xi_temperature_table: None,
            geometry: GeometryConfig::default(),
            fdtd: FdtdConfig::default(),
            source: SourceConfig::default(),
            monitors: MonitorConfig::default(),
            emitter: EmitterConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

impl Default for MetalConfig {
    fn default() -> Self {
        let s = DrudeMaterial::silver();
        Self {
            eps_inf: s.eps_inf,
            plasma_energy_ev: s.plasma_energy,
            damping_energy_ev: s.damping_energy_room,
            loss_factor: s.loss_factor,
        }
    }
}

impl Default for DielectricConfig {
    fn default() -> Self {
        Self {
            permittivity: Dielectric::gaas().permittivity,
        }
    }
}

impl Default for GeometryConfig {
    fn default() -> Self {
        let g = DeviceGeometry::default();
        Self {
            period_nm: g.period_a,
            groove_width_nm: g.groove_width,
            groove_depth_nm: g.groove_depth,
            metal_thickness_nm: g.metal_thickness,
            cavity_length_nm: g.cavity_length,
            dbr_periods: g.dbr_periods_per_side,
            dx_nm: 2.0,
            substrate_height_nm: g.substrate_height,
            air_height_nm: g.air_height,
            slab_overhang_nm: g.slab_overhang,
            side_margin_nm: g.side_margin,
        }
    }
}

impl Default for FdtdConfig {
    fn default() -> Self {
        let s = FdtdSettings::default();
        Self {
            dt_safety: s.dt_safety,
            pml_cells: 20,
            pml_order: s.pml_order,
            pml_reflection: s.pml_reflection,
            pml_alpha: s.pml_alpha,
            search_periods: 60.0,
            duration_periods: 150.0,
            execution: Execution::default(),
        }
    }
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self {
            orientation: DipoleOrientation::Z,
            x_offset_nm: 29.0,
            z_depth_nm: 20.0,
            search_center_ev: 1.32,
            search_bandwidth_ev: 0.88,
            ringdown_bandwidth_fraction: 0.01,
            amplitude: 1.0,
        }
    }
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self {
            band_ev: [0.88, 1.76],
            probe_depth_nm: 12.0,
            probe_fractions: vec![0.0, 0.23, 0.47, 0.71, -0.59],
            probe_cadence: 4,
            energy_cadence: 16,
            snapshot_samples_per_period: 12,
            fit_fraction: 0.7,
            cavity_box_depth_nm: 150.0,
            profile_depth_nm: 20.0,
            bragg_window: 0.15,
        }
    }
}

impl Default for EmitterConfig {
    fn default() -> Self {
        Self {
            dipole_moment_cm: 1e-28,
            gamma_bulk_ghz: 1.0,
            gamma_nr_ghz: 0.0,
            z_depth_nm: 20.0,
            at_antinode: true,
            x_offset_nm: 0.0,
            orientation: DipoleOrientation::Z,
            assumed_width_y_nm: 50.0,
        }
    }
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            axis: SweepAxis::CavityLength,
            values: (0..=35).map(|j| 150.0 + 10.0 * j as f64).collect(),
            workers: 1,
            output: PathBuf::from("runs/sweep"),
        }
    }
}

fn check(cond: bool, path: &str, message: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::config(path, message))
    }
}

impl RunConfig {
    /// Parses and validates a TOML document.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let value: toml::Value = toml::from_str(text).map_err(|e| Error::config("<document>", e.message().to_string()))?;
        Self::from_value(value)
    }

    fn from_value(value: toml::Value) -> Result<Self> {
        let cfg: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path == "." { "<document>".into() } else { path }, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configuration serializes")
    }

    /// Applies `section.key = raw` overrides (dashes in keys read as
    /// underscores) and re-validates.
    pub fn with_overrides<'a, I>(&self, overrides: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut value = toml::Value::try_from(self).map_err(|e| Error::Serde(e.to_string()))?;
        for (key, raw) in overrides {
            let key = key.trim_start_matches('-').replace('-', "_");
            let parsed = toml::from_str::<toml::Table>(&format!("v = {raw}"))
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(raw.to_string()));
            let mut node = &mut value;
            let parts: Vec<&str> = key.split('.').collect();
            for (depth, part) in parts.iter().enumerate() {
                let table = node
                    .as_table_mut()
                    .ok_or_else(|| Error::config(parts[..depth].join("."), "not a section"))?;
                if depth + 1 == parts.len() {
                    table.insert(part.to_string(), parsed.clone());
                    break;
                }
                node = table
                    .entry(part.to_string())
                    .or_insert_with(|| toml::Value::Table(Default::default()));
            }
        }
        Self::from_value(value)
    }

    /// Semantic checks beyond the schema, reported with the key path.
    pub fn validate(&self) -> Result<()> {
        check(self.version == SCHEMA_VERSION, "version", format!("unsupported schema version `{}` (expected `{SCHEMA_VERSION}`)", self.version))?;
        self.material().map_err(|e| Error::config("metal", e.to_string()))?;
        self.dielectric().map_err(|e| Error::config("dielectric.permittivity", e.to_string()))?;
        self.temperature_table().map_err(|e| Error::config("xi_temperature_table", e.to_string()))?;
        let g = &self.geometry;
        for (key, v) in [
            ("period_nm", g.period_nm),
            ("groove_width_nm", g.groove_width_nm),
            ("groove_depth_nm", g.groove_depth_nm),
            ("metal_thickness_nm", g.metal_thickness_nm),
            ("cavity_length_nm", g.cavity_length_nm),
            ("dx_nm", g.dx_nm),
            ("substrate_height_nm", g.substrate_height_nm),
            ("air_height_nm", g.air_height_nm),
        ] {
            check(v > 0.0 && v.is_finite(), &format!("geometry.{key}"), format!("must be positive, got {v}"))?;
        }
        check(
            g.groove_width_nm < g.period_nm,
            "geometry.groove_width_nm",
            format!("groove width {} nm must be smaller than the period {} nm", g.groove_width_nm, g.period_nm),
        )?;
        check(g.dbr_periods >= 1, "geometry.dbr_periods", "at least one period per side is required")?;
        check(
            g.dx_nm <= g.groove_width_nm,
            "geometry.dx_nm",
            format!("dx {} nm exceeds the groove width {} nm", g.dx_nm, g.groove_width_nm),
        )?;
        self.device_geometry().validate().map_err(|e| Error::config("geometry", e.to_string()))?;
        let f = &self.fdtd;
        check(f.dt_safety > 0.0 && f.dt_safety <= 1.0, "fdtd.dt_safety", format!("must lie in (0, 1], got {}", f.dt_safety))?;
        check(f.pml_cells >= 4, "fdtd.pml_cells", "at least 4 PML cells are required")?;
        check(f.pml_reflection > 0.0 && f.pml_reflection < 1.0, "fdtd.pml_reflection", "must lie in (0, 1)")?;
        check(f.pml_order >= 1.0, "fdtd.pml_order", "must be at least 1")?;
        check(f.pml_alpha >= 0.0, "fdtd.pml_alpha", "must be nonnegative")?;
        check(f.search_periods >= 20.0, "fdtd.search_periods", "at least 20 periods are needed to resolve peaks")?;
        check(f.duration_periods >= 20.0, "fdtd.duration_periods", "at least 20 periods are needed for the ring-down")?;
        let s = &self.source;
        check(s.z_depth_nm > 0.0, "source.z_depth_nm", "source must sit below the interface")?;
        check(s.search_center_ev > 0.0, "source.search_center_ev", "must be positive")?;
        check(
            s.search_bandwidth_ev > 0.0,
            "source.search_bandwidth_ev",
            "bandwidth must be positive",
        )?;
        check(
            s.ringdown_bandwidth_fraction > 0.0 && s.ringdown_bandwidth_fraction < 1.0,
            "source.ringdown_bandwidth_fraction",
            "must lie in (0, 1)",
        )?;
        check(s.amplitude != 0.0 && s.amplitude.is_finite(), "source.amplitude", "must be finite and nonzero")?;
        let m = &self.monitors;
        check(m.band_ev[0] > 0.0 && m.band_ev[1] > m.band_ev[0], "monitors.band_ev", "band must be increasing and positive")?;
        check(!m.probe_fractions.is_empty(), "monitors.probe_fractions", "at least one probe is required")?;
        check(
            m.probe_fractions.iter().all(|f| f.abs() < 1.0),
            "monitors.probe_fractions",
            "probes must lie inside the cavity (|fraction| < 1)",
        )?;
        check(m.probe_depth_nm > 0.0, "monitors.probe_depth_nm", "must be positive")?;
        check(m.bragg_window > 0.0, "monitors.bragg_window", "must be positive")?;
        check(m.probe_cadence >= 1, "monitors.probe_cadence", "must be at least 1")?;
        check(m.energy_cadence >= 1, "monitors.energy_cadence", "must be at least 1")?;
        check(m.snapshot_samples_per_period >= 4, "monitors.snapshot_samples_per_period", "at least 4 samples per period")?;
        check(m.fit_fraction > 0.0 && m.fit_fraction <= 1.0, "monitors.fit_fraction", "must lie in (0, 1]")?;
        check(m.cavity_box_depth_nm > 0.0, "monitors.cavity_box_depth_nm", "must be positive")?;
        check(m.profile_depth_nm > 0.0, "monitors.profile_depth_nm", "must be positive")?;
        let e = &self.emitter;
        check(e.dipole_moment_cm > 0.0, "emitter.dipole_moment_cm", "must be positive")?;
        check(e.gamma_bulk_ghz > 0.0, "emitter.gamma_bulk_ghz", "must be positive")?;
        check(e.gamma_nr_ghz >= 0.0, "emitter.gamma_nr_ghz", "must be nonnegative")?;
        check(e.z_depth_nm > 0.0, "emitter.z_depth_nm", "emitter must sit below the interface")?;
        check(e.assumed_width_y_nm > 0.0, "emitter.assumed_width_y_nm", "must be positive")?;
        check(self.sweep.workers >= 1, "sweep.workers", "must be at least 1")?;
        crate::experiments::check_axis_values(self.sweep.axis, &self.sweep.values)
            .map_err(|e| Error::config("sweep.values", e.to_string()))?;
        Ok(())
    }

    pub fn material(&self) -> Result<DrudeMaterial> {
        DrudeMaterial::new(
            self.metal.eps_inf,
            self.metal.plasma_energy_ev,
            self.metal.damping_energy_ev,
            self.metal.loss_factor,
        )
    }

    pub fn dielectric(&self) -> Result<Dielectric> {
        Dielectric::new(self.dielectric.permittivity)
    }

    pub fn media(&self) -> Result<Media> {
        Ok(Media {
            metal: self.material()?,
            dielectric: self.dielectric()?,
        })
    }

    pub fn temperature_table(&self) -> Result<XiTemperatureTable> {
        match &self.xi_temperature_table {
            Some(pairs) => XiTemperatureTable::from_pairs(pairs.iter().map(|p| (p[0], p[1])).collect()),
            None => XiTemperatureTable::with_rrr(SILVER_RRR),
        }
    }

    pub fn device_geometry(&self) -> DeviceGeometry {
        let g = &self.geometry;
        DeviceGeometry {
            period_a: g.period_nm,
            groove_width: g.groove_width_nm,
            groove_depth: g.groove_depth_nm,
            metal_thickness: g.metal_thickness_nm,
            cavity_length: g.cavity_length_nm,
            dbr_periods_per_side: g.dbr_periods,
            substrate_height: g.substrate_height_nm,
            air_height: g.air_height_nm,
            pml_thickness: self.fdtd.pml_cells as f64 * g.dx_nm,
            slab_overhang: g.slab_overhang_nm,
            side_margin: g.side_margin_nm,
        }
    }

    pub fn fdtd_settings(&self) -> FdtdSettings {
        let f = &self.fdtd;
        FdtdSettings {
            dt_safety: f.dt_safety,
            pml_order: f.pml_order,
            pml_reflection: f.pml_reflection,
            pml_alpha: f.pml_alpha,
            reference_energy: self.source.search_center_ev,
            execution: f.execution,
            ..FdtdSettings::default()
        }
    }

    pub fn source_kind(&self) -> SourceKind {
        match self.source.orientation {
            DipoleOrientation::Z => SourceKind::ElectricDipoleZ,
            DipoleOrientation::X => SourceKind::ElectricDipoleX,
        }
    }

    /// Stable hash of the canonical JSON serialization.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_vec(self).expect("configuration serializes");
        hex::encode(&Sha256::digest(&json)[..12])
    }
}
