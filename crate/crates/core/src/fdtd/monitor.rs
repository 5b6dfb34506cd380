//! Monitor definitions and recorded time series.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::geometry::Region;
use crate::io::{num, CsvTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Component {
    Ex,
    Ez,
    Hy,
}

/// Outward normal of a flux line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Bottom,
    Top,
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MonitorKind {
    /// Field value at one Yee node.
    PointProbe { component: Component, i: usize, k: usize },
    /// Outward Poynting flux (W/m) through one side of `region`.
    FluxLine { region: Region, side: Side },
    /// Electromagnetic plus Drude kinetic energy (J/m) in `region`.
    EnergyRegion { region: Region },
    /// Drude dissipation (W/m) in `region`.
    AbsorptionRegion { region: Region },
    /// Running DFT of Ex and Ez over the whole grid at `omega` (rad/s),
    /// accumulated from `start_step` on.
    FieldSnapshot { omega: f64, start_step: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorSpec {
    pub name: String,
    pub kind: MonitorKind,
    /// Sampling interval in steps (>= 1).
    pub cadence: usize,
}

impl MonitorSpec {
    pub fn new(name: impl Into<String>, kind: MonitorKind, cadence: usize) -> Self {
        Self {
            name: name.into(),
            kind,
            cadence: cadence.max(1),
        }
    }

    /// The four flux lines bounding `region`, named `{prefix}_{side}`.
    pub fn flux_box(prefix: &str, region: Region, cadence: usize) -> Vec<Self> {
        [
            (Side::Bottom, "bottom"),
            (Side::Top, "top"),
            (Side::Left, "left"),
            (Side::Right, "right"),
        ]
        .into_iter()
        .map(|(side, tag)| Self::new(format!("{prefix}_{tag}"), MonitorKind::FluxLine { region, side }, cadence))
        .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub step: usize,
    pub time: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub name: String,
    pub samples: Vec<Sample>,
}

impl TimeSeries {
    pub fn values(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.value).collect()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.time).collect()
    }

    /// Samples with `time >= t0`.
    pub fn after(&self, t0: f64) -> TimeSeries {
        TimeSeries {
            name: self.name.clone(),
            samples: self.samples.iter().copied().filter(|s| s.time >= t0).collect(),
        }
    }

    /// `step,time_fs,value` CSV.
    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(["step", "time_fs", "value"]);
        for s in &self.samples {
            t.push(vec![s.step.to_string(), num(s.time * 1e15), num(s.value)]);
        }
        t
    }
}

/// Complex field amplitudes on the Yee nodes at one frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub name: String,
    pub omega: f64,
    pub nx: usize,
    pub nz: usize,
    pub ex: Vec<Complex64>,
    pub ez: Vec<Complex64>,
    pub samples: usize,
}

impl Snapshot {
    /// Field at the centre of cell `(i, k)`, averaged from the two bounding
    /// nodes of each component.
    pub fn cell_field(&self, i: usize, k: usize) -> (Complex64, Complex64) {
        let nz = self.nz;
        let ex_hi = if k + 1 < nz { self.ex[i * nz + k + 1] } else { Complex64::default() };
        let ez_hi = if i + 1 < self.nx { self.ez[(i + 1) * nz + k] } else { Complex64::default() };
        (
            0.5 * (self.ex[i * nz + k] + ex_hi),
            0.5 * (self.ez[i * nz + k] + ez_hi),
        )
    }

    /// `|E|^2` at cell centres, k contiguous.
    pub fn intensity(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.nx * self.nz];
        for i in 0..self.nx {
            for k in 0..self.nz {
                let (ex, ez) = self.cell_field(i, k);
                out[i * self.nz + k] = ex.norm_sqr() + ez.norm_sqr();
            }
        }
        out
    }

    pub fn scaled(&self, c: Complex64) -> Snapshot {
        Snapshot {
            ex: self.ex.iter().map(|v| v * c).collect(),
            ez: self.ez.iter().map(|v| v * c).collect(),
            ..self.clone()
        }
    }
}

/// Output of a run: one time series per scalar monitor and one snapshot per
/// DFT monitor.
#[derive(Debug, Clone, Default)]
pub struct MonitorRecords {
    pub dt: f64,
    pub steps: usize,
    pub series: Vec<TimeSeries>,
    pub snapshots: Vec<Snapshot>,
}

impl MonitorRecords {
    pub fn series(&self, name: &str) -> Option<&TimeSeries> {
        self.series.iter().find(|s| s.name == name)
    }

    pub fn snapshot(&self, name: &str) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| s.name == name)
    }

    /// Pointwise sum of several series sampled on the same steps.
    pub fn sum_series(&self, names: &[&str]) -> Option<TimeSeries> {
        let first = self.series(names.first()?)?;
        let mut out = TimeSeries {
            name: names.join("+"),
            samples: first.samples.clone(),
        };
        for n in &names[1..] {
            let s = self.series(n)?;
            if s.samples.len() != out.samples.len() {
                return None;
            }
            for (o, v) in out.samples.iter_mut().zip(&s.samples) {
                o.value += v.value;
            }
        }
        Some(out)
    }
}
