//! File formats: binary grid/snapshot export, CSV tables and JSON helpers.
//!
//! Binary layout (all integers little-endian), 32-byte header:
//!
//! | bytes  | content                                           |
//! |--------|---------------------------------------------------|
//! | 0..8   | magic `b"PDBRGRID"`                               |
//! | 8..12  | `nx` (u32)                                        |
//! | 12..16 | `nz` (u32)                                        |
//! | 16..24 | `dx` in micro-nanometres (u64, `round(dx * 1e6)`) |
//! | 24     | component tag (see `TAG_*`)                       |
//! | 25..28 | reserved, zero                                    |
//! | 28..32 | PML thickness in cells (u32)                      |
//!
//! The body is `nx * nz` elements in `i`-major order (`index = i * nz + k`).
//! Cell-kind files carry one byte per cell (0 air, 1 dielectric, 2 metal);
//! field snapshots carry two f64 per node (real, imaginary part of the
//! complex amplitude).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"PDBRGRID";
pub const HEADER_LEN: usize = 32;
pub const TAG_CELL_KIND: u8 = 0;
pub const TAG_EX: u8 = 1;
pub const TAG_EZ: u8 = 2;
pub const TAG_HY: u8 = 3;

pub fn grid_header(nx: usize, nz: usize, dx_nm: f64, pml_cells: usize, tag: u8) -> Vec<u8> {
    let mut h = Vec::with_capacity(HEADER_LEN);
    h.extend_from_slice(MAGIC);
    h.extend_from_slice(&(nx as u32).to_le_bytes());
    h.extend_from_slice(&(nz as u32).to_le_bytes());
    h.extend_from_slice(&((dx_nm * 1e6).round() as u64).to_le_bytes());
    h.push(tag);
    h.extend_from_slice(&[0u8; 3]);
    h.extend_from_slice(&(pml_cells as u32).to_le_bytes());
    debug_assert_eq!(h.len(), HEADER_LEN);
    h
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridHeader {
    pub nx: usize,
    pub nz: usize,
    pub dx_nm: f64,
    pub tag: u8,
    pub pml_cells: usize,
}

pub fn parse_header(bytes: &[u8]) -> Result<GridHeader> {
    if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
        return Err(Error::Serde("not a grid file (bad magic)".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let dx = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as f64 / 1e6;
    Ok(GridHeader {
        nx: u32_at(8),
        nz: u32_at(12),
        dx_nm: dx,
        tag: bytes[24],
        pml_cells: u32_at(28),
    })
}

/// Complex field snapshot in the binary grid format.
pub fn snapshot_bytes(nx: usize, nz: usize, dx_nm: f64, pml_cells: usize, tag: u8, data: &[Complex64]) -> Vec<u8> {
    let mut out = grid_header(nx, nz, dx_nm, pml_cells, tag);
    out.reserve(data.len() * 16);
    for v in data {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    out
}

pub fn parse_snapshot(bytes: &[u8]) -> Result<(GridHeader, Vec<Complex64>)> {
    let h = parse_header(bytes)?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != h.nx * h.nz * 16 {
        return Err(Error::Serde("snapshot body length mismatch".into()));
    }
    let data = body
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    Ok((h, data))
}

/// Minimal CSV table: header row mandatory, `.` decimal separator, LF.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}", self.header.join(","));
        for r in &self.rows {
            let _ = writeln!(s, "{}", r.join(","));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Serde("empty CSV".into()))?
            .split(',')
            .map(str::to_owned)
            .collect();
        let rows = lines
            .filter(|l| !l.is_empty())
            .map(|l| l.split(',').map(str::to_owned).collect())
            .collect();
        Ok(Self { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let idx = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[idx].as_str()).collect())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_file(path, self.render().as_bytes())
    }
}

/// Number formatting used in every CSV: shortest round-trip representation.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::from("nan")
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Serde(e.to_string()))?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Serde(format!("{}: {e}", path.display())))
}
