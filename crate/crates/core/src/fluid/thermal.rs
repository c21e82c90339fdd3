//! Implicit heat conduction in flux form and the implicit temperature sink.

use crate::constitutive::EosParams;
use crate::geometry::{CoefficientFields, Grid};
use crate::Result;

use super::linalg::pcg;
use super::{temperatures, FluidState};

#[inline]
fn harmonic(a: f64, b: f64) -> f64 {
    if a > 0.0 && b > 0.0 {
        2.0 * a * b / (a + b)
    } else {
        0.0
    }
}

/// Face conductivities over cells with heat capacity; zero flux across `dB`.
struct Conduction {
    grid: Grid,
    /// Face between `k` and `k + 1`, stored at `k`.
    east: Vec<f64>,
    /// Face between `k` and `k + n`, stored at `k`.
    north: Vec<f64>,
    /// Index range holding every nonzero face.
    faces: std::ops::Range<usize>,
}

impl Conduction {
    fn new(grid: &Grid, kappa: &[f64], active: &[bool]) -> Self {
        let n = grid.n;
        let mut east = vec![0.0; grid.cells()];
        let mut north = vec![0.0; grid.cells()];
        for j in 0..n {
            for i in 0..n {
                let k = grid.index(i, j);
                if !active[k] {
                    continue;
                }
                if i + 1 < n && active[k + 1] {
                    east[k] = harmonic(kappa[k], kappa[k + 1]);
                }
                if j + 1 < n && active[k + n] {
                    north[k] = harmonic(kappa[k], kappa[k + n]);
                }
            }
        }
        let first = active.iter().position(|&a| a).unwrap_or(0);
        let last = active.iter().rposition(|&a| a).map_or(0, |k| k + 1);
        Self {
            grid: *grid,
            east,
            north,
            faces: first..last.max(first),
        }
    }

    /// `(L t)_k = sum_faces kappa_f (t_k - t_nb) / h^2`.
    fn apply(&self, t: &[f64], out: &mut [f64]) {
        let n = self.grid.n;
        let inv = 1.0 / (self.grid.h * self.grid.h);
        out.iter_mut().for_each(|v| *v = 0.0);
        for k in self.faces.clone() {
            let ke = self.east[k];
            if ke > 0.0 {
                let f = ke * (t[k] - t[k + 1]) * inv;
                out[k] += f;
                out[k + 1] -= f;
            }
            let kn = self.north[k];
            if kn > 0.0 {
                let f = kn * (t[k] - t[k + n]) * inv;
                out[k] += f;
                out[k + n] -= f;
            }
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        let n = self.grid.n;
        let inv = 1.0 / (self.grid.h * self.grid.h);
        let mut d = vec![0.0; self.grid.cells()];
        for k in 0..self.grid.cells() {
            d[k] += (self.east[k] + self.north[k]) * inv;
            if self.east[k] > 0.0 {
                d[k + 1] += self.east[k] * inv;
            }
            if self.north[k] > 0.0 {
                d[k + n] += self.north[k] * inv;
            }
        }
        d
    }
}

/// One implicit conduction step on the thermal energy; returns CG iterations.
///
/// Uses the secant capacity `C = q / theta` so the update stays in flux form
/// and conserves the thermal-energy total exactly.
pub fn diffuse(
    state: &mut FluidState,
    eos: &EosParams,
    coeffs: &CoefficientFields,
    tau: f64,
    tol: f64,
) -> Result<usize> {
    let grid = state.grid;
    let cells = grid.cells();
    let theta = temperatures(state, eos, &coeffs.f);
    let mut cap = vec![0.0; cells];
    let mut kappa = vec![0.0; cells];
    let mut active = vec![false; cells];
    for k in 0..cells {
        cap[k] = if theta[k] > 0.0 {
            state.qth[k] / theta[k]
        } else {
            state.rho[k]
        };
        active[k] = cap[k] > 0.0;
        kappa[k] = eos.transport_coeffs(theta[k], coeffs.g[k], coeffs.h[k]).2;
    }
    let cond = Conduction::new(&grid, &kappa, &active);
    let diag = cond.diagonal();
    let inv: Vec<f64> = (0..cells)
        .map(|k| if active[k] { 1.0 / (cap[k] / tau + diag[k]) } else { 0.0 })
        .collect();
    let rhs: Vec<f64> = (0..cells)
        .map(|k| if active[k] { cap[k] / tau * theta[k] } else { 0.0 })
        .collect();
    let mut t = theta.clone();
    let apply = |x: &[f64], out: &mut [f64]| {
        cond.apply(x, out);
        for k in 0..cells {
            out[k] = if active[k] { out[k] + cap[k] / tau * x[k] } else { 0.0 };
        }
    };
    let iters = pcg("thermal", apply, &inv, &rhs, &mut t, tol, 5000)?;
    let mut flux = vec![0.0; cells];
    cond.apply(&t, &mut flux);
    for k in 0..cells {
        if active[k] {
            state.qth[k] = (state.qth[k] - tau * flux[k]).max(0.0);
        }
    }
    Ok(iters)
}

/// Implicit sink `rho theta + a f theta^4 + tau xi theta^5 = q`; returns the removed
/// energy summed over cells (without the cell area).
pub fn apply_sink(state: &mut FluidState, eos: &EosParams, coeffs: &CoefficientFields, tau: f64) -> f64 {
    if eos.xi == 0.0 {
        return 0.0;
    }
    let c = tau * eos.xi;
    let mut removed = 0.0;
    for k in 0..state.grid.cells() {
        let q = state.qth[k];
        if q <= 0.0 {
            continue;
        }
        let f = coeffs.f[k];
        let t = eos.recover_temperature_with_sink(state.rho[k], q, f, c);
        let q_new = eos.thermal_energy(state.rho[k], t, f).min(q);
        removed += q - q_new;
        state.qth[k] = q_new;
    }
    removed
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eos() -> EosParams {
        EosParams { a: 0.0, xi: 0.0, ..Default::default() }
    }

    #[test]
    fn uniform_temperature_is_unchanged() {
        let grid = Grid::new(16, 1.0);
        let mut st = FluidState::zeros(grid);
        st.rho.fill(1.0);
        st.qth.fill(2.0);
        let coeffs = CoefficientFields::uniform(grid.cells());
        diffuse(&mut st, &eos(), &coeffs, 0.1, 1e-12).unwrap();
        assert!(st.qth.iter().all(|&q| (q - 2.0).abs() < 1e-13));
    }

    #[test]
    fn gaussian_diffusion_conserves_thermal_energy() {
        let grid = Grid::new(32, 1.0);
        let n = grid.n;
        let mut st = FluidState::zeros(grid);
        st.rho.fill(1.0);
        for j in 0..n {
            for i in 0..n {
                let x = grid.center(i, j);
                st.qth[grid.index(i, j)] = 1.0 + (-(x[0] * x[0] + x[1] * x[1]) / 0.05).exp();
            }
        }
        let total0: f64 = st.qth.iter().sum();
        let coeffs = CoefficientFields::uniform(grid.cells());
        let peak0 = st.qth.iter().cloned().fold(0.0, f64::max);
        for _ in 0..5 {
            diffuse(&mut st, &eos(), &coeffs, 0.01, 1e-13).unwrap();
        }
        let total: f64 = st.qth.iter().sum();
        assert!((total - total0).abs() <= 1e-12 * total0);
        assert!(st.qth.iter().cloned().fold(0.0, f64::max) < peak0);
    }

    #[test]
    fn sink_follows_quintic_ode() {
        // theta' = -xi theta^5 for rho = 1, a = 0
        let grid = Grid::new(4, 1.0);
        let mut st = FluidState::zeros(grid);
        st.rho.fill(1.0);
        st.qth.fill(1.0);
        let e = EosParams { xi: 0.5, ..eos() };
        let coeffs = CoefficientFields::uniform(grid.cells());
        let (t_end, steps) = (1.0, 20_000);
        let tau = t_end / steps as f64;
        let mut removed = 0.0;
        for _ in 0..steps {
            removed += apply_sink(&mut st, &e, &coeffs, tau);
        }
        let rhs = |t: f64| -0.5 * t.powi(5);
        let (mut t, m) = (1.0f64, 100_000);
        let h = t_end / m as f64;
        for _ in 0..m {
            let k1 = rhs(t);
            let k2 = rhs(t + 0.5 * h * k1);
            let k3 = rhs(t + 0.5 * h * k2);
            let k4 = rhs(t + h * k3);
            t += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        assert!((st.qth[0] - t).abs() < 1e-4 * t);
        assert!((removed - 16.0 * (1.0 - st.qth[0])).abs() < 1e-12);
    }
}
