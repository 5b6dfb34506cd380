//! Dispersive 2D FDTD simulator and analysis suite for plasmonic
//! distributed-Bragg-reflector cavities.
//!
//! The crate is organised bottom-up:
//!
//! * [`materials`]: Drude permittivity, surface-plasmon dispersion, grating
//!   design and the loss-factor/temperature map.
//! * [`geometry`]: parametric DBR cavity layout and rasterisation.
//! * [`fdtd`]: TM (Ex, Ez, Hy) Yee engine with an auxiliary Drude current,
//!   convolutional PML, dipole sources and monitors.
//! * [`analysis`]: resonance finding, quality factors, mode volume and
//!   field-profile analysis.
//! * [`cqed`]: Purcell factor, emitter coupling and strong-coupling verdicts.
//! * [`experiments`]: two-phase mode extraction and parameter sweeps.
//! * [`config`]: the run configuration file.

pub mod analysis;
pub mod config;
pub mod cqed;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod fdtd;
pub mod geometry;
pub mod io;
pub mod materials;
pub mod units;

pub use error::{Error, Result};
