//! Conservative first-order upwind transport on interior faces.

use crate::geometry::Grid;
use crate::{Error, Result};

/// Normal velocities on interior faces; faces on the box boundary carry no flux.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceVelocities {
    pub grid: Grid,
    /// Face between `(i, j)` and `(i + 1, j)`, index `j * (n - 1) + i`.
    pub x: Vec<f64>,
    /// Face between `(i, j)` and `(i, j + 1)`, index `j * n + i`.
    pub y: Vec<f64>,
}

impl FaceVelocities {
    pub fn zeros(grid: &Grid) -> Self {
        let n = grid.n;
        Self {
            grid: *grid,
            x: vec![0.0; (n - 1) * n],
            y: vec![0.0; n * (n - 1)],
        }
    }

    /// Averages of neighbouring cell velocities.
    pub fn from_cells(grid: &Grid, ux: &[f64], uy: &[f64]) -> Self {
        let n = grid.n;
        let mut f = Self::zeros(grid);
        for j in 0..n {
            for i in 0..n - 1 {
                let k = grid.index(i, j);
                f.x[j * (n - 1) + i] = 0.5 * (ux[k] + ux[k + 1]);
            }
        }
        for j in 0..n - 1 {
            for i in 0..n {
                let k = grid.index(i, j);
                f.y[j * n + i] = 0.5 * (uy[k] + uy[k + n]);
            }
        }
        f
    }

    /// Uniform velocity on every interior face.
    pub fn uniform(grid: &Grid, u: [f64; 2]) -> Self {
        let mut f = Self::zeros(grid);
        f.x.fill(u[0]);
        f.y.fill(u[1]);
        f
    }

    /// Largest `sum of outgoing |u_face| / h` over cells; `tau` times this must stay `<= 1`.
    pub fn max_outflow_rate(&self) -> f64 {
        let n = self.grid.n;
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                let mut out = 0.0;
                if i + 1 < n {
                    out += self.x[j * (n - 1) + i].max(0.0);
                }
                if i > 0 {
                    out += (-self.x[j * (n - 1) + i - 1]).max(0.0);
                }
                if j + 1 < n {
                    out += self.y[j * n + i].max(0.0);
                }
                if j > 0 {
                    out += (-self.y[(j - 1) * n + i]).max(0.0);
                }
                worst = worst.max(out);
            }
        }
        worst / self.grid.h
    }

    /// Upwind update of `d_t f + div(f u) = 0` over one step.
    pub fn transport(&self, field: &[f64], tau: f64) -> Result<Vec<f64>> {
        let courant = self.max_outflow_rate() * tau;
        if courant > 1.0 + 1e-12 {
            return Err(Error::Cfl { courant });
        }
        let n = self.grid.n;
        let lam = tau / self.grid.h;
        let mut out = field.to_vec();
        for j in 0..n {
            for i in 0..n - 1 {
                let k = self.grid.index(i, j);
                let u = self.x[j * (n - 1) + i];
                let flux = lam * if u > 0.0 { u * field[k] } else { u * field[k + 1] };
                out[k] -= flux;
                out[k + 1] += flux;
            }
        }
        for j in 0..n - 1 {
            for i in 0..n {
                let k = self.grid.index(i, j);
                let u = self.y[j * n + i];
                let flux = lam * if u > 0.0 { u * field[k] } else { u * field[k + n] };
                out[k] -= flux;
                out[k + n] += flux;
            }
        }
        Ok(out)
    }
}

/// Upwind transport of a cell field with the given face velocities.
pub fn transport_step(field: &[f64], faces: &FaceVelocities, tau: f64) -> Result<Vec<f64>> {
    faces.transport(field, tau)
}
