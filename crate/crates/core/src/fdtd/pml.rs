//! Convolutional PML (CFS, recursively updated) coefficient profiles.
//!
//! Stretching `s = 1 + sigma / (alpha + i w eps0)` (kappa = 1), graded
//! polynomially from the inner PML face to the outer wall.

use crate::units::{C0, EPS0, MU0};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmlParams {
    pub cells: usize,
    pub order: f64,
    /// Theoretical normal-incidence reflection of the graded layer.
    pub reflection: f64,
    /// `alpha_max / (eps0 * omega_ref)`; frequency-shift of the CFS pole.
    pub alpha_max: f64,
}

impl Default for PmlParams {
    fn default() -> Self {
        Self {
            cells: 20,
            order: 3.0,
            reflection: 1e-8,
            alpha_max: 0.05,
        }
    }
}

/// Recursive-convolution coefficients `psi <- b psi + c dF/du` at every node
/// along one axis. Outside the layer `b = c = 0`.
#[derive(Debug, Clone, Default)]
pub struct AxisProfile {
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl AxisProfile {
    /// Coefficients for nodes at positions `(j + offset) * dx`, `j in 0..n`,
    /// on an axis of `cells` total cells whose first and last `params.cells`
    /// are PML. `index_low` / `index_high` are the refractive indices of the
    /// media the low and high layers back onto; `None` disables that side.
    pub fn new(
        cells: usize,
        offset: f64,
        dx: f64,
        dt: f64,
        params: &PmlParams,
        index_low: Option<f64>,
        index_high: Option<f64>,
        omega_ref: f64,
    ) -> Self {
        let p = params.cells as f64;
        let eta0 = (MU0 / EPS0).sqrt();
        let depth = p * dx;
        let sigma_max = |n: f64| -(params.order + 1.0) * params.reflection.ln() / (2.0 * eta0 * n * depth);
        let alpha_max = params.alpha_max * EPS0 * omega_ref;
        let mut b = vec![0.0; cells];
        let mut c = vec![0.0; cells];
        let lo_face = p;
        let hi_face = cells as f64 - p;
        for j in 0..cells {
            let u = j as f64 + offset;
            let (rho, n) = if u < lo_face {
                match index_low {
                    Some(n) => ((lo_face - u) / p, n),
                    None => continue,
                }
            } else if u > hi_face {
                match index_high {
                    Some(n) => ((u - hi_face) / p, n),
                    None => continue,
                }
            } else {
                continue;
            };
            let rho = rho.min(1.0);
            let sigma = sigma_max(n) * rho.powf(params.order);
            let alpha = alpha_max * (1.0 - rho);
            let bb = (-(sigma + alpha) * dt / EPS0).exp();
            b[j] = bb;
            c[j] = if sigma > 0.0 { sigma / (sigma + alpha) * (bb - 1.0) } else { 0.0 };
        }
        Self { b, c }
    }

    pub fn active(&self, j: usize) -> bool {
        self.c[j] != 0.0
    }
}

/// Courant number limit of the 2D Yee scheme in vacuum.
pub fn courant_dt(dx_m: f64) -> f64 {
    dx_m / (C0 * std::f64::consts::SQRT_2)
}
