//! Momentum: explicit pressure impulse and the implicit viscous-penalty solve.

use std::cell::RefCell;

use crate::constitutive::{stress_with, EosParams};
use crate::geometry::{CoefficientFields, Grid};
use crate::Result;

use super::interface::MarkerSet;
use super::linalg::pcg;
use super::{central_gradient, pinned_mask, FluidParams, FluidState};

/// `m -= tau grad P` with centered differences.
pub fn pressure_impulse(grid: &Grid, ptot: &[f64], tau: f64, mx: &mut [f64], my: &mut [f64]) {
    let (gx, gy) = central_gradient(grid, ptot);
    for k in 0..grid.cells() {
        mx[k] -= tau * gx[k];
        my[k] -= tau * gy[k];
    }
}

/// Viscous force `div S(u)`, the negative adjoint of the centered velocity gradient.
pub fn stress_divergence(
    grid: &Grid,
    mu: &[f64],
    eta: &[f64],
    ux: &[f64],
    uy: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let c = grid.cells();
    let mut work: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; c]);
    let mut dx = vec![0.0; c];
    let mut dy = vec![0.0; c];
    let all = Window::full(grid.n);
    stress_divergence_into(grid, mu, eta, ux, uy, all, &mut work, &mut dx, &mut dy);
    (dx, dy)
}

/// Half-open cell index rectangle `[i0, i1) x [j0, j1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Window {
    i0: usize,
    i1: usize,
    j0: usize,
    j1: usize,
}

impl Window {
    fn full(n: usize) -> Self {
        Self { i0: 0, i1: n, j0: 0, j1: n }
    }

    /// Bounding box of the `true` cells, or an empty window.
    fn bounding(n: usize, mask: &[bool]) -> Self {
        let mut w = Self { i0: n, i1: 0, j0: n, j1: 0 };
        for (k, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
            let (i, j) = (k % n, k / n);
            w.i0 = w.i0.min(i);
            w.i1 = w.i1.max(i + 1);
            w.j0 = w.j0.min(j);
            w.j1 = w.j1.max(j + 1);
        }
        w
    }

    fn grow(self, by: usize, n: usize) -> Self {
        if self.i0 >= self.i1 {
            return self;
        }
        Self {
            i0: self.i0.saturating_sub(by),
            i1: (self.i1 + by).min(n),
            j0: self.j0.saturating_sub(by),
            j1: (self.j1 + by).min(n),
        }
    }
}

/// Allocation-free [`stress_divergence`] restricted to `win`; `work` holds the
/// four stress components. Entries of `dx`, `dy` outside `win` are not written.
#[allow(clippy::too_many_arguments)]
fn stress_divergence_into(
    grid: &Grid,
    mu: &[f64],
    eta: &[f64],
    ux: &[f64],
    uy: &[f64],
    win: Window,
    work: &mut [Vec<f64>; 4],
    dx: &mut [f64],
    dy: &mut [f64],
) {
    let n = grid.n;
    let inv = 0.5 / grid.h;
    let at = |f: &[f64], k: usize, ok: bool| if ok { f[k] } else { 0.0 };
    let [sxx, sxy, syx, syy] = work;
    let halo = win.grow(1, n);
    for j in halo.j0..halo.j1 {
        for i in halo.i0..halo.i1 {
            let k = j * n + i;
            let (e, w, nn, s) = (i + 1 < n, i > 0, j + 1 < n, j > 0);
            let g = [
                [
                    (at(ux, k + 1, e) - at(ux, k.wrapping_sub(1), w)) * inv,
                    (at(ux, k + n, nn) - at(ux, k.wrapping_sub(n), s)) * inv,
                ],
                [
                    (at(uy, k + 1, e) - at(uy, k.wrapping_sub(1), w)) * inv,
                    (at(uy, k + n, nn) - at(uy, k.wrapping_sub(n), s)) * inv,
                ],
            ];
            let st = stress_with(mu[k], eta[k], &g);
            sxx[k] = st[0][0];
            sxy[k] = st[0][1];
            syx[k] = st[1][0];
            syy[k] = st[1][1];
        }
    }
    for j in win.j0..win.j1 {
        for i in win.i0..win.i1 {
            let k = j * n + i;
            let (e, w, nn, s) = (i + 1 < n, i > 0, j + 1 < n, j > 0);
            dx[k] = (at(sxx, k + 1, e) - at(sxx, k.wrapping_sub(1), w)
                + at(sxy, k + n, nn)
                - at(sxy, k.wrapping_sub(n), s))
                * inv;
            dy[k] = (at(syx, k + 1, e) - at(syx, k.wrapping_sub(1), w)
                + at(syy, k + n, nn)
                - at(syy, k.wrapping_sub(n), s))
                * inv;
        }
    }
}

/// `(d / tau) u - div S(u) + P u = m* / tau + P_target` over the non-pinned cells,
/// with `d = (rho^2 + eps^2) / rho` and `P` the kernel penalty.
#[derive(Debug)]
pub struct ViscousProblem<'a> {
    grid: Grid,
    active: Vec<bool>,
    mass: Vec<f64>,
    pub mu: Vec<f64>,
    pub eta: Vec<f64>,
    markers: &'a MarkerSet,
    /// `(delta / dt) l_j / h^2` per marker.
    marker_gain: Vec<f64>,
    tau: f64,
    tol: f64,
    max_iter: usize,
    /// Bounding box of the active cells.
    window: Window,
    work: RefCell<[Vec<f64>; 4]>,
}

impl<'a> ViscousProblem<'a> {
    pub fn new(
        state: &FluidState,
        params: &FluidParams,
        coeffs: &CoefficientFields,
        theta: &[f64],
        markers: &'a MarkerSet,
        tau: f64,
    ) -> Self {
        let grid = state.grid;
        let eos: &EosParams = &params.eos;
        let pinned = pinned_mask(&grid, &state.rho, params.eps_v);
        let cells = grid.cells();
        let mut mu = vec![0.0; cells];
        let mut eta = vec![0.0; cells];
        let mut mass = vec![0.0; cells];
        for k in 0..cells {
            let (m, e, _) = eos.transport_coeffs(theta[k], coeffs.g[k], 1.0);
            mu[k] = m;
            eta[k] = e;
            let r = state.rho[k];
            if !pinned[k] {
                mass[k] = (r * r + params.eps_v * params.eps_v) / r;
            }
        }
        let active: Vec<bool> = pinned.iter().map(|p| !p).collect();
        let inv_area = 1.0 / grid.cell_area();
        let marker_gain = markers
            .weights
            .iter()
            .map(|l| params.penalty * l * inv_area)
            .collect();
        Self {
            grid,
            window: Window::bounding(grid.n, &active),
            active,
            mass,
            mu,
            eta,
            markers,
            marker_gain,
            tau,
            tol: params.cg_tol,
            max_iter: params.cg_max_iter,
            work: RefCell::new(std::array::from_fn(|_| vec![0.0; cells])),
        }
    }

    fn split<'x>(&self, x: &'x [f64]) -> (&'x [f64], &'x [f64]) {
        x.split_at(self.grid.cells())
    }

    /// Penalty operator `sum_j g_j w_j (w_j . u)` added to `out`.
    fn add_penalty(&self, ux: &[f64], uy: &[f64], ox: &mut [f64], oy: &mut [f64]) {
        for (j, s) in self.markers.stencils.iter().enumerate() {
            let (mut sx, mut sy) = (0.0, 0.0);
            for &(c, w) in s {
                sx += w * ux[c];
                sy += w * uy[c];
            }
            let g = self.marker_gain[j];
            for &(c, w) in s {
                ox[c] += g * w * sx;
                oy[c] += g * w * sy;
            }
        }
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let cells = self.grid.cells();
        let (ux, uy) = self.split(x);
        let (ox, oy) = out.split_at_mut(cells);
        let mut work = self.work.borrow_mut();
        let win = self.window;
        stress_divergence_into(&self.grid, &self.mu, &self.eta, ux, uy, win, &mut work, ox, oy);
        let n = self.grid.n;
        for j in win.j0..win.j1 {
            for k in j * n + win.i0..j * n + win.i1 {
                ox[k] = self.mass[k] / self.tau * ux[k] - ox[k];
                oy[k] = self.mass[k] / self.tau * uy[k] - oy[k];
            }
        }
        self.add_penalty(ux, uy, ox, oy);
    }

    fn inverse_diagonal(&self) -> Vec<f64> {
        let n = self.grid.n;
        let cells = self.grid.cells();
        let q = 0.25 / (self.grid.h * self.grid.h);
        let mut diag = vec![0.0; 2 * cells];
        for j in 0..n {
            for i in 0..n {
                let k = self.grid.index(i, j);
                let (mut dxx, mut dyy) = (0.0, 0.0);
                for (nb, ok) in [(k.wrapping_sub(1), i > 0), (k + 1, i + 1 < n)] {
                    if ok {
                        dxx += (self.mu[nb] + self.eta[nb]) * q;
                        dyy += self.mu[nb] * q;
                    }
                }
                for (nb, ok) in [(k.wrapping_sub(n), j > 0), (k + n, j + 1 < n)] {
                    if ok {
                        dxx += self.mu[nb] * q;
                        dyy += (self.mu[nb] + self.eta[nb]) * q;
                    }
                }
                let m = self.mass[k] / self.tau;
                diag[k] = m + dxx;
                diag[cells + k] = m + dyy;
            }
        }
        for (j, s) in self.markers.stencils.iter().enumerate() {
            for &(c, w) in s {
                let p = self.marker_gain[j] * w * w;
                diag[c] += p;
                diag[cells + c] += p;
            }
        }
        (0..2 * cells)
            .map(|i| {
                if self.active[i % cells] && diag[i] > 0.0 {
                    1.0 / diag[i]
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Solves for the new velocity, warm-started from `m / d`.
    pub fn solve(&self, state: &FluidState) -> Result<(Vec<f64>, Vec<f64>, usize)> {
        let cells = self.grid.cells();
        let mut rhs = vec![0.0; 2 * cells];
        let mut x = vec![0.0; 2 * cells];
        for k in 0..cells {
            if self.active[k] {
                rhs[k] = state.mx[k] / self.tau;
                rhs[cells + k] = state.my[k] / self.tau;
                x[k] = state.mx[k] / self.mass[k];
                x[cells + k] = state.my[k] / self.mass[k];
            }
        }
        for (j, s) in self.markers.stencils.iter().enumerate() {
            let g = self.marker_gain[j] * self.markers.target[j];
            let n = self.markers.normals[j];
            for &(c, w) in s {
                if self.active[c] {
                    rhs[c] += g * w * n[0];
                    rhs[cells + c] += g * w * n[1];
                }
            }
        }
        let inv = self.inverse_diagonal();
        let iters = pcg(
            "viscous",
            |a, b| self.apply(a, b),
            &inv,
            &rhs,
            &mut x,
            self.tol,
            self.max_iter,
        )?;
        let uy = x.split_off(cells);
        Ok((x, uy, iters))
    }

    /// `m = m* + tau (div S(u) + f_pen(u))` on active cells, zero elsewhere.
    pub fn update_momentum(&self, state: &mut FluidState, ux: &[f64], uy: &[f64]) {
        let cells = self.grid.cells();
        let (dx, dy) = stress_divergence(&self.grid, &self.mu, &self.eta, ux, uy);
        let mut px = vec![0.0; cells];
        let mut py = vec![0.0; cells];
        self.add_penalty(ux, uy, &mut px, &mut py);
        let mut tx = vec![0.0; cells];
        let mut ty = vec![0.0; cells];
        for (j, s) in self.markers.stencils.iter().enumerate() {
            let g = self.marker_gain[j] * self.markers.target[j];
            let n = self.markers.normals[j];
            for &(c, w) in s {
                tx[c] += g * w * n[0];
                ty[c] += g * w * n[1];
            }
        }
        for k in 0..cells {
            if self.active[k] {
                state.mx[k] += self.tau * (dx[k] - px[k] + tx[k]);
                state.my[k] += self.tau * (dy[k] - py[k] + ty[k]);
            } else {
                state.mx[k] = 0.0;
                state.my[k] = 0.0;
            }
        }
    }
}
