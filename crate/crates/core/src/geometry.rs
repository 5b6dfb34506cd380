//! Parametric DBR plasmon cavity and its rasterisation onto the Yee grid.
//!
//! Coordinates: `x` is measured from the cavity centre, `z` from the flat
//! metal/dielectric interface with `z > 0` pointing into the metal slab and
//! the air above it. Cell `(i, k)` covers `[i dx, (i+1) dx] x [k dx, (k+1) dx]`
//! in grid coordinates; flat arrays are stored with `k` contiguous.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum CellKind {
    Air = 0,
    Dielectric = 1,
    Metal = 2,
}

/// All lengths in nm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceGeometry {
    pub period_a: f64,
    pub groove_width: f64,
    pub groove_depth: f64,
    pub metal_thickness: f64,
    /// Uninterrupted metal surface between the inner edges of the innermost
    /// grooves.
    pub cavity_length: f64,
    pub dbr_periods_per_side: usize,
    /// Dielectric between the interface and the lower PML.
    pub substrate_height: f64,
    /// Air between the top of the slab and the upper PML.
    pub air_height: f64,
    pub pml_thickness: f64,
    /// Slab continuation beyond the outermost groove.
    pub slab_overhang: f64,
    /// Metal-free gap between the end of the slab and the lateral PML.
    pub side_margin: f64,
}

impl Default for DeviceGeometry {
    fn default() -> Self {
        Self {
            period_a: 116.0,
            groove_width: 20.0,
            groove_depth: 30.0,
            metal_thickness: 30.0,
            cavity_length: 328.0,
            dbr_periods_per_side: 5,
            substrate_height: 600.0,
            air_height: 600.0,
            pml_thickness: 40.0,
            slab_overhang: 100.0,
            side_margin: 200.0,
        }
    }
}

impl DeviceGeometry {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("period_a", self.period_a),
            ("groove_width", self.groove_width),
            ("groove_depth", self.groove_depth),
            ("metal_thickness", self.metal_thickness),
            ("cavity_length", self.cavity_length),
            ("substrate_height", self.substrate_height),
            ("air_height", self.air_height),
            ("pml_thickness", self.pml_thickness),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Construction(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("slab_overhang", self.slab_overhang), ("side_margin", self.side_margin)] {
            if !(v >= 0.0) {
                return Err(Error::Construction(format!("{name} must be nonnegative, got {v}")));
            }
        }
        if self.groove_width >= self.period_a {
            return Err(Error::Construction(format!(
                "groove width {} must be smaller than period {}",
                self.groove_width, self.period_a
            )));
        }
        if self.dbr_periods_per_side == 0 {
            return Err(Error::Construction("at least one DBR period per side is required".into()));
        }
        if self.groove_depth >= self.substrate_height {
            return Err(Error::Construction(format!(
                "substrate height {} does not contain grooves of depth {}",
                self.substrate_height, self.groove_depth
            )));
        }
        Ok(())
    }

    /// Distance from the cavity centre to the end of the metal slab.
    pub fn slab_half_width(&self) -> f64 {
        self.cavity_length / 2.0
            + (self.dbr_periods_per_side as f64 - 1.0) * self.period_a
            + self.groove_width
            + self.slab_overhang
    }

    /// Analytic metal cross-section in nm^2.
    pub fn metal_area(&self) -> f64 {
        2.0 * self.slab_half_width() * self.metal_thickness
            + 2.0 * self.dbr_periods_per_side as f64 * self.groove_width * self.groove_depth
    }

    /// Perimeter of the metal cross-section in nm.
    pub fn metal_perimeter(&self) -> f64 {
        2.0 * (2.0 * self.slab_half_width() + self.metal_thickness)
            + 2.0 * self.dbr_periods_per_side as f64 * 2.0 * self.groove_depth
    }

    /// Right-side groove spans `[start, end)` in nm from the cavity centre.
    pub fn groove_spans(&self) -> Vec<(f64, f64)> {
        (0..self.dbr_periods_per_side)
            .map(|j| {
                let start = self.cavity_length / 2.0 + j as f64 * self.period_a;
                (start, start + self.groove_width)
            })
            .collect()
    }
}

/// Rasterised device: one [`CellKind`] per cell plus the indices needed to
/// map physical positions back onto the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialGrid {
    pub nx: usize,
    pub nz: usize,
    /// Cell size in nm.
    pub dx: f64,
    pub pml_cells: usize,
    /// Cell-boundary index of the cavity centre.
    pub center_i: usize,
    /// Row index of the first metal row of the slab (the interface plane).
    pub interface_k: usize,
    /// Number of metal rows in the slab.
    pub slab_rows: usize,
    /// Slab extent `[start, end)` in cell indices.
    pub slab_span: (usize, usize),
    /// All grooves, left to right, `[start, end)` cell indices.
    pub grooves: Vec<(usize, usize)>,
    pub groove_rows: usize,
    pub geometry: DeviceGeometry,
    cells: Vec<CellKind>,
}

fn cells_for(length_nm: f64, dx: f64) -> usize {
    (length_nm / dx).round().max(0.0) as usize
}

/// Rasterises `geom` with cell size `dx` (nm). Feature edges snap to the
/// nearest cell boundary, which is the same as sampling each cell at its
/// centre. Features are built on the right and mirrored, so the map is
/// exactly symmetric about the cavity centre.
pub fn build_grid(geom: &DeviceGeometry, dx: f64) -> Result<MaterialGrid> {
    geom.validate()?;
    if !(dx > 0.0) {
        return Err(Error::Construction(format!("dx must be positive, got {dx}")));
    }
    if dx > geom.groove_width {
        return Err(Error::Resolution {
            dx,
            groove_width: geom.groove_width,
        });
    }
    let p = cells_for(geom.pml_thickness, dx).max(1);
    let side = cells_for(geom.side_margin, dx);
    let half_slab = cells_for(geom.slab_half_width(), dx);
    let center_i = p + side + half_slab;
    let nx = 2 * center_i;

    let n_sub = cells_for(geom.substrate_height, dx);
    let n_metal = cells_for(geom.metal_thickness, dx);
    let n_air = cells_for(geom.air_height, dx);
    let n_groove = cells_for(geom.groove_depth, dx);
    if n_metal == 0 || n_groove == 0 || n_sub <= n_groove || n_air == 0 {
        return Err(Error::Construction(format!(
            "features vanish at dx = {dx} nm (slab {n_metal}, groove {n_groove}, substrate {n_sub}, air {n_air} cells)"
        )));
    }
    let interface_k = p + n_sub;
    let nz = interface_k + n_metal + n_air + p;

    let mut right = Vec::with_capacity(geom.dbr_periods_per_side);
    for (s, e) in geom.groove_spans() {
        let (s, e) = (cells_for(s, dx), cells_for(e, dx));
        if e <= s {
            return Err(Error::Construction(format!("groove collapses to zero width at dx = {dx}")));
        }
        if let Some(&(_, prev_end)) = right.last() {
            if s <= prev_end {
                return Err(Error::Construction("adjacent grooves merge after snapping".into()));
            }
        }
        right.push((s, e));
    }
    if right[0].0 == 0 {
        return Err(Error::Construction("cavity collapses to zero length after snapping".into()));
    }
    if right.last().unwrap().1 > half_slab {
        return Err(Error::Construction("grooves extend beyond the slab".into()));
    }
    let mut grooves: Vec<(usize, usize)> = right
        .iter()
        .rev()
        .map(|&(s, e)| (center_i - e, center_i - s))
        .collect();
    grooves.extend(right.iter().map(|&(s, e)| (center_i + s, center_i + e)));

    let slab_span = (center_i - half_slab, center_i + half_slab);
    let mut cells = vec![CellKind::Air; nx * nz];
    for i in 0..nx {
        let in_slab = i >= slab_span.0 && i < slab_span.1;
        let in_groove = grooves.iter().any(|&(s, e)| i >= s && i < e);
        for k in 0..nz {
            let kind = if k < interface_k - n_groove {
                CellKind::Dielectric
            } else if k < interface_k {
                if in_groove {
                    CellKind::Metal
                } else {
                    CellKind::Dielectric
                }
            } else if k < interface_k + n_metal && in_slab {
                CellKind::Metal
            } else {
                CellKind::Air
            };
            cells[i * nz + k] = kind;
        }
    }

    let grid = MaterialGrid {
        nx,
        nz,
        dx,
        pml_cells: p,
        center_i,
        interface_k,
        slab_rows: n_metal,
        slab_span,
        grooves,
        groove_rows: n_groove,
        geometry: geom.clone(),
        cells,
    };
    if grid.metal_in_pml() {
        return Err(Error::Construction("metal reaches into the PML".into()));
    }
    Ok(grid)
}

impl MaterialGrid {
    #[inline]
    pub fn kind(&self, i: usize, k: usize) -> CellKind {
        self.cells[i * self.nz + k]
    }

    pub fn cells(&self) -> &[CellKind] {
        &self.cells
    }

    /// Uniform grid of a single material, without device features. Used by
    /// engine validation runs.
    pub fn uniform(nx: usize, nz: usize, dx: f64, pml_cells: usize, kind: CellKind) -> Self {
        Self::from_cells(nx, nz, dx, pml_cells, vec![kind; nx * nz])
    }

    /// Grid from an explicit cell map (k contiguous). Device indices are set
    /// to the domain centre.
    pub fn from_cells(nx: usize, nz: usize, dx: f64, pml_cells: usize, cells: Vec<CellKind>) -> Self {
        assert_eq!(cells.len(), nx * nz);
        Self {
            nx,
            nz,
            dx,
            pml_cells,
            center_i: nx / 2,
            interface_k: nz / 2,
            slab_rows: 0,
            slab_span: (nx / 2, nx / 2),
            grooves: Vec::new(),
            groove_rows: 0,
            geometry: DeviceGeometry::default(),
            cells,
        }
    }

    pub fn set_kind(&mut self, i: usize, k: usize, kind: CellKind) {
        self.cells[i * self.nz + k] = kind;
    }

    pub fn metal_cell_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c == CellKind::Metal).count()
    }

    /// Physical (non-PML) cell range `[i0, i1) x [k0, k1)`.
    pub fn physical_region(&self) -> Region {
        Region {
            i0: self.pml_cells,
            i1: self.nx - self.pml_cells,
            k0: self.pml_cells,
            k1: self.nz - self.pml_cells,
        }
    }

    pub fn in_pml(&self, i: usize, k: usize) -> bool {
        !self.physical_region().contains(i, k)
    }

    pub fn metal_in_pml(&self) -> bool {
        let p = self.pml_cells;
        (0..self.nx).any(|i| {
            (0..self.nz).any(|k| {
                (i < p || i >= self.nx - p || k < p || k >= self.nz - p)
                    && self.kind(i, k) == CellKind::Metal
            })
        })
    }

    /// x coordinate (nm, from the cavity centre) of cell boundary `i`.
    pub fn x_of_boundary(&self, i: usize) -> f64 {
        (i as f64 - self.center_i as f64) * self.dx
    }

    /// z coordinate (nm, from the interface) of row boundary `k`.
    pub fn z_of_boundary(&self, k: usize) -> f64 {
        (k as f64 - self.interface_k as f64) * self.dx
    }

    pub fn cavity_span(&self) -> (usize, usize) {
        let half = self.grooves.len() / 2;
        if self.grooves.is_empty() {
            return (self.center_i, self.center_i);
        }
        (self.grooves[half - 1].1, self.grooves[half].0)
    }

    /// Grid index of the `Ez` node nearest to an emitter at `x_offset` from
    /// the cavity centre and `z_depth` below the interface (both nm).
    pub fn emitter_position(&self, x_offset: f64, z_depth: f64) -> Result<(usize, usize)> {
        if !(z_depth > 0.0) {
            return Err(Error::Placement(format!(
                "depth {z_depth} nm is not below the metal/dielectric interface"
            )));
        }
        let i = self.center_i as f64 + (x_offset / self.dx).round();
        let k = self.interface_k as f64 - (z_depth / self.dx).round().max(1.0);
        if i < 1.0 || k < 0.0 || i >= self.nx as f64 {
            return Err(Error::Placement(format!(
                "position ({x_offset}, -{z_depth}) nm lies outside the grid"
            )));
        }
        let (i, k) = (i as usize, k as usize);
        if self.in_pml(i, k) || self.in_pml(i - 1, k) {
            return Err(Error::Placement(format!(
                "position ({x_offset}, -{z_depth}) nm lies in the PML"
            )));
        }
        if self.kind(i, k) == CellKind::Metal || self.kind(i - 1, k) == CellKind::Metal {
            return Err(Error::Placement(format!(
                "position ({x_offset}, -{z_depth}) nm lies inside metal"
            )));
        }
        Ok((i, k))
    }

    /// Cell-kind export: 32-byte header followed by one byte per cell.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = crate::io::grid_header(self.nx, self.nz, self.dx, self.pml_cells, crate::io::TAG_CELL_KIND);
        out.extend(self.cells.iter().map(|&c| c as u8));
        out
    }
}

/// Rectangle of cells `[i0, i1) x [k0, k1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub i0: usize,
    pub i1: usize,
    pub k0: usize,
    pub k1: usize,
}

impl Region {
    pub fn contains(&self, i: usize, k: usize) -> bool {
        i >= self.i0 && i < self.i1 && k >= self.k0 && k < self.k1
    }

    pub fn inside(&self, other: &Region) -> bool {
        self.i0 >= other.i0 && self.i1 <= other.i1 && self.k0 >= other.k0 && self.k1 <= other.k1
    }

    pub fn cell_count(&self) -> usize {
        (self.i1 - self.i0) * (self.k1 - self.k0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_defaults_metal_area() {
        let g = DeviceGeometry::default();
        let grid = build_grid(&g, 2.0).unwrap();
        let area = grid.metal_cell_count() as f64 * 4.0;
        let rel = (area - g.metal_area()).abs() / g.metal_area();
        assert!(rel < 0.02, "rel = {rel}");
        assert_eq!(grid.grooves.len(), 10);
    }

    #[test]
    fn degenerate_cavity_rejected() {
        let g = DeviceGeometry {
            cavity_length: 0.0,
            ..Default::default()
        };
        assert!(matches!(build_grid(&g, 2.0), Err(Error::Construction(_))));
    }

    #[test]
    fn one_period_gives_two_grooves() {
        let g = DeviceGeometry {
            dbr_periods_per_side: 1,
            ..Default::default()
        };
        let grid = build_grid(&g, 2.0).unwrap();
        assert_eq!(grid.grooves.len(), 2);
    }

    #[test]
    fn coarse_grid_is_resolution_error() {
        let g = DeviceGeometry::default();
        assert!(matches!(build_grid(&g, 25.0), Err(Error::Resolution { .. })));
    }

    #[test]
    fn groove_wider_than_period_rejected() {
        let g = DeviceGeometry {
            groove_width: 120.0,
            ..Default::default()
        };
        assert!(matches!(build_grid(&g, 2.0), Err(Error::Construction(_))));
    }

    #[test]
    fn emitter_placement() {
        let grid = build_grid(&DeviceGeometry::default(), 2.0).unwrap();
        let (i, k) = grid.emitter_position(0.0, 20.0).unwrap();
        assert_eq!(i, grid.center_i);
        assert_eq!(k, grid.interface_k - 10);
        assert!(matches!(grid.emitter_position(0.0, -10.0), Err(Error::Placement(_))));
        let g = &grid.geometry;
        let x = g.cavity_length / 2.0 + 5.0 * g.period_a;
        assert!(grid.emitter_position(x, 20.0).is_ok());
        // inside the first groove
        assert!(matches!(
            grid.emitter_position(g.cavity_length / 2.0 + 10.0, 10.0),
            Err(Error::Placement(_))
        ));
    }

    #[test]
    fn mirror_symmetric_and_deterministic() {
        for dx in [2.0, 3.0, 4.0] {
            let g = DeviceGeometry {
                cavity_length: 330.0,
                ..Default::default()
            };
            let grid = build_grid(&g, dx).unwrap();
            assert_eq!(grid, build_grid(&g, dx).unwrap());
            for i in 0..grid.nx {
                for k in 0..grid.nz {
                    assert_eq!(grid.kind(i, k), grid.kind(grid.nx - 1 - i, k));
                }
            }
        }
    }

    #[test]
    fn refinement_area_bound() {
        let g = DeviceGeometry {
            period_a: 129.0,
            cavity_length: 301.0,
            groove_width: 21.0,
            ..Default::default()
        };
        for dx in [2.0, 3.0] {
            let coarse = build_grid(&g, 2.0 * dx).unwrap().metal_cell_count() as f64 * 4.0 * dx * dx;
            let fine = build_grid(&g, dx).unwrap().metal_cell_count() as f64 * dx * dx;
            assert!((coarse - fine).abs() < 2.0 * g.metal_perimeter() * dx);
        }
    }

    #[test]
    fn no_metal_in_pml_and_layout() {
        let grid = build_grid(&DeviceGeometry::default(), 4.0).unwrap();
        assert!(!grid.metal_in_pml());
        assert_eq!(grid.kind(grid.center_i, grid.interface_k), CellKind::Metal);
        assert_eq!(grid.kind(grid.center_i, grid.interface_k - 1), CellKind::Dielectric);
        assert_eq!(grid.kind(grid.center_i, grid.interface_k + grid.slab_rows), CellKind::Air);
        let (c0, c1) = grid.cavity_span();
        assert_eq!((c1 - c0) as f64 * 4.0, 328.0);
    }
}
