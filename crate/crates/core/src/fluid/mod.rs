//! Finite-volume fluid on the fixed box: state, velocity recovery, time-step
//! bounds and the full substep.

pub mod interface;
pub mod linalg;
pub mod momentum;
pub mod thermal;
pub mod transport;

use crate::constitutive::{stress_work, EosParams};
use crate::geometry::{CoefficientFields, Grid};
use crate::{Error, Result, Tensor2, Vec2};

use interface::MarkerSet;

#[derive(Debug, Clone, PartialEq)]
pub struct FluidState {
    pub grid: Grid,
    pub rho: Vec<f64>,
    pub b: Vec<f64>,
    pub mx: Vec<f64>,
    pub my: Vec<f64>,
    /// Thermal energy density `rho theta + a f theta^4`.
    pub qth: Vec<f64>,
    pub t: f64,
}

impl FluidState {
    pub fn zeros(grid: Grid) -> Self {
        let c = grid.cells();
        Self {
            grid,
            rho: vec![0.0; c],
            b: vec![0.0; c],
            mx: vec![0.0; c],
            my: vec![0.0; c],
            qth: vec![0.0; c],
            t: 0.0,
        }
    }

    /// Fields in checkpoint order.
    pub fn fields(&self) -> [(&'static str, &Vec<f64>); 5] {
        [
            ("rho", &self.rho),
            ("b", &self.b),
            ("mx", &self.mx),
            ("my", &self.my),
            ("qth", &self.qth),
        ]
    }

    pub fn check_finite(&self) -> Result<()> {
        for (name, f) in self.fields() {
            if let Some(cell) = f.iter().position(|x| !x.is_finite()) {
                return Err(Error::NotFinite { field: name, cell });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluidParams {
    pub eos: EosParams,
    /// Advective Courant factor.
    pub cfl: f64,
    /// Absolute vacuum regularization `eps_v`; cells with `rho <= eps_v` are pinned.
    pub eps_v: f64,
    /// Kernel half-width in cells.
    pub kernel_halfwidth: f64,
    /// Penalty weight `delta / dt`.
    pub penalty: f64,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
}

impl FluidParams {
    pub fn new(eos: EosParams, penalty: f64) -> Self {
        Self {
            eos,
            cfl: 0.4,
            eps_v: 1e-8,
            kernel_halfwidth: 2.0,
            penalty,
            cg_tol: 1e-11,
            cg_max_iter: 5000,
        }
    }
}

/// Vacuum-regularized velocity `m rho / (rho^2 + eps^2)`.
#[inline]
pub fn velocity(rho: f64, m: Vec2, eps: f64) -> Vec2 {
    let d = rho * rho + eps * eps;
    if rho <= 0.0 || d == 0.0 {
        return [0.0, 0.0];
    }
    [m[0] * rho / d, m[1] * rho / d]
}

/// Cells whose velocity is held at zero: the outer ring and vacuum.
pub fn pinned_mask(grid: &Grid, rho: &[f64], eps_v: f64) -> Vec<bool> {
    let n = grid.n;
    let mut pinned = vec![false; grid.cells()];
    for j in 0..n {
        for i in 0..n {
            let k = grid.index(i, j);
            pinned[k] = grid.on_boundary(i, j) || rho[k] <= eps_v;
        }
    }
    pinned
}

pub fn cell_velocities(state: &FluidState, eps_v: f64, pinned: &[bool]) -> (Vec<f64>, Vec<f64>) {
    let c = state.grid.cells();
    let mut ux = vec![0.0; c];
    let mut uy = vec![0.0; c];
    for k in 0..c {
        if !pinned[k] {
            let u = velocity(state.rho[k], [state.mx[k], state.my[k]], eps_v);
            ux[k] = u[0];
            uy[k] = u[1];
        }
    }
    (ux, uy)
}

pub fn temperatures(state: &FluidState, eos: &EosParams, f: &[f64]) -> Vec<f64> {
    state
        .rho
        .iter()
        .zip(&state.qth)
        .zip(f)
        .map(|((&r, &q), &fl)| eos.recover_temperature(r, q, fl))
        .collect()
}

/// Centered differences with zero values outside the box.
pub fn central_gradient(grid: &Grid, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = grid.n;
    let inv = 0.5 / grid.h;
    let mut gx = vec![0.0; grid.cells()];
    let mut gy = vec![0.0; grid.cells()];
    for j in 0..n {
        for i in 0..n {
            let k = grid.index(i, j);
            let e = if i + 1 < n { f[k + 1] } else { 0.0 };
            let w = if i > 0 { f[k - 1] } else { 0.0 };
            let nn = if j + 1 < n { f[k + n] } else { 0.0 };
            let s = if j > 0 { f[k - n] } else { 0.0 };
            gx[k] = (e - w) * inv;
            gy[k] = (nn - s) * inv;
        }
    }
    (gx, gy)
}

/// `G[a][b] = d u_a / d x_b` per cell by centered differences.
pub fn velocity_gradient(grid: &Grid, ux: &[f64], uy: &[f64]) -> Vec<Tensor2> {
    let (uxx, uxy) = central_gradient(grid, ux);
    let (uyx, uyy) = central_gradient(grid, uy);
    (0..grid.cells())
        .map(|k| [[uxx[k], uxy[k]], [uyx[k], uyy[k]]])
        .collect()
}

/// Centered divergence, equal to the negative adjoint of [`central_gradient`].
pub fn central_divergence(grid: &Grid, fx: &[f64], fy: &[f64]) -> Vec<f64> {
    let (dx, _) = central_gradient(grid, fx);
    let (_, dy) = central_gradient(grid, fy);
    dx.iter().zip(&dy).map(|(a, b)| a + b).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CflBounds {
    pub advective: f64,
    pub diffusive: f64,
}

impl CflBounds {
    pub fn min(&self) -> f64 {
        self.advective.min(self.diffusive)
    }
}

/// Advective bound `C h / (|u| + c_s)` and diffusive bound `C rho h^2 / (2 kappa)`.
pub fn cfl_bounds(
    state: &FluidState,
    eos: &EosParams,
    coeffs: &CoefficientFields,
    cfl: f64,
    eps_v: f64,
) -> Result<CflBounds> {
    let h = state.grid.h;
    let mut adv = f64::INFINITY;
    let mut dif = f64::INFINITY;
    for k in 0..state.grid.cells() {
        let (r, b, q) = (state.rho[k], state.b[k], state.qth[k]);
        if !(r.is_finite() && b.is_finite() && q.is_finite()) {
            return Err(Error::ZeroStep);
        }
        if r <= eps_v {
            continue;
        }
        let theta = eos.recover_temperature(r, q, coeffs.f[k]);
        let u = velocity(r, [state.mx[k], state.my[k]], eps_v);
        let speed = u[0].hypot(u[1]) + eos.sound_speed_sq(r, b, theta).sqrt();
        if speed > 0.0 {
            adv = adv.min(cfl * h / speed);
        }
        let (_, _, kappa) = eos.transport_coeffs(theta, coeffs.g[k], coeffs.h[k]);
        if kappa > 0.0 {
            dif = dif.min(cfl * r * h * h / (2.0 * kappa));
        }
    }
    if adv.is_nan() || dif.is_nan() {
        return Err(Error::ZeroStep);
    }
    Ok(CflBounds {
        advective: adv,
        diffusive: dif,
    })
}

/// Integrals accumulated over one substep, all already multiplied by `tau h^2`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SubstepTally {
    pub entropy_production: f64,
    pub exterior_dissipation: f64,
    pub sink: f64,
    /// `tau * sum_j l_j |U_j - W_j n_j|^2`.
    pub mismatch: f64,
    pub viscous_iterations: usize,
    pub thermal_iterations: usize,
}

/// Largest stable substep from the current velocities: the advective bound
/// and the outflow rate that keeps upwind transport positive.
pub fn stable_step(
    state: &FluidState,
    params: &FluidParams,
    coeffs: &CoefficientFields,
) -> Result<f64> {
    let bounds = cfl_bounds(state, &params.eos, coeffs, params.cfl, params.eps_v)?;
    let pinned = pinned_mask(&state.grid, &state.rho, params.eps_v);
    let (ux, uy) = cell_velocities(state, params.eps_v, &pinned);
    let faces = transport::FaceVelocities::from_cells(&state.grid, &ux, &uy);
    let rate = faces.max_outflow_rate();
    let mut tau = bounds.advective;
    if rate > 0.0 {
        tau = tau.min(0.9 / rate);
    }
    Ok(tau)
}

/// One fluid substep of length `tau`.
pub fn substep(
    state: &mut FluidState,
    params: &FluidParams,
    coeffs: &CoefficientFields,
    markers: &MarkerSet,
    tau: f64,
) -> Result<SubstepTally> {
    if !(tau > 0.0) {
        return Err(Error::ZeroStep);
    }
    let grid = state.grid;
    let eos = &params.eos;
    let cells = grid.cells();
    let area = grid.cell_area();

    // explicit stage: pressure forces and work with the old state, then transport
    let pinned = pinned_mask(&grid, &state.rho, params.eps_v);
    let (ux, uy) = cell_velocities(state, params.eps_v, &pinned);
    let faces = transport::FaceVelocities::from_cells(&grid, &ux, &uy);
    let courant = faces.max_outflow_rate() * tau;
    if courant > 1.0 + 1e-12 {
        return Err(Error::Cfl { courant });
    }
    let theta = temperatures(state, eos, &coeffs.f);
    let mut ptot = vec![0.0; cells];
    let mut pth = vec![0.0; cells];
    for k in 0..cells {
        let f = coeffs.f[k];
        ptot[k] = eos.total_pressure(state.rho[k], state.b[k], theta[k], f);
        pth[k] = eos.thermal_pressure(state.rho[k], theta[k], f);
    }
    let div_u = central_divergence(&grid, &ux, &uy);
    for k in 0..cells {
        // p_th <= q_th and tau div u <= 1 keep this nonnegative
        state.qth[k] = (state.qth[k] - tau * pth[k] * div_u[k]).max(0.0);
    }
    momentum::pressure_impulse(&grid, &ptot, tau, &mut state.mx, &mut state.my);
    for f in [
        &mut state.rho,
        &mut state.b,
        &mut state.qth,
        &mut state.mx,
        &mut state.my,
    ] {
        *f = faces.transport(f, tau)?;
    }

    // implicit viscous and penalty stage
    let theta = temperatures(state, eos, &coeffs.f);
    let visc = momentum::ViscousProblem::new(state, params, coeffs, &theta, markers, tau);
    let (vx, vy, viscous_iterations) = visc.solve(state)?;
    visc.update_momentum(state, &vx, &vy);
    let grad = velocity_gradient(&grid, &vx, &vy);
    for k in 0..cells {
        state.qth[k] += tau * stress_work(visc.mu[k], visc.eta[k], &grad[k]);
    }

    // implicit heat conduction and temperature sink
    let thermal_iterations = thermal::diffuse(state, eos, coeffs, tau, params.cg_tol)?;
    let sink = thermal::apply_sink(state, eos, coeffs, tau) * area;

    let theta = temperatures(state, eos, &coeffs.f);
    let sigma =
        crate::diagnostics::entropy_production_density(&grid, &theta, &vx, &vy, eos, coeffs);
    let mut entropy_production = 0.0;
    let mut exterior_dissipation = 0.0;
    for k in 0..cells {
        entropy_production += sigma[k];
        if !coeffs.inside[k] {
            exterior_dissipation += sigma[k];
        }
    }
    let mismatch = markers.mismatch(&vx, &vy);
    state.t += tau;
    state.check_finite()?;
    Ok(SubstepTally {
        entropy_production: tau * area * entropy_production,
        exterior_dissipation: tau * area * exterior_dissipation,
        sink,
        mismatch: tau * mismatch,
        viscous_iterations,
        thermal_iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn velocity_examples() {
        let u = velocity(1.0, [2.0, 0.0], 1e-8);
        assert!((u[0] - 2.0).abs() < 1e-12 && u[1] == 0.0);
        assert_eq!(velocity(0.0, [3.0, -1.0], 1e-8), [0.0, 0.0]);
        let eps = 1e-8;
        let u = velocity(eps, [1.0, 0.0], eps);
        assert!((u[0] - 0.5 / eps).abs() < 1e-6 / eps);
    }

    #[test]
    fn cfl_examples() {
        let grid = Grid::new(16, 2.0);
        let mut st = FluidState::zeros(grid);
        st.rho.fill(1.0);
        let eos = EosParams { delta: 0.0, a: 0.0, ..Default::default() };
        let coeffs = CoefficientFields::uniform(grid.cells());
        let b = cfl_bounds(&st, &eos, &coeffs, 0.4, 1e-8).unwrap();
        assert!((b.advective - 0.4 * grid.h / 2f64.sqrt()).abs() < 1e-15);

        let coarse = Grid::new(8, 2.0);
        let mut st2 = FluidState::zeros(coarse);
        st2.rho.fill(1.0);
        let b2 = cfl_bounds(&st2, &eos, &CoefficientFields::uniform(64), 0.4, 1e-8).unwrap();
        assert!((b2.advective - 2.0 * b.advective).abs() < 1e-15);

        let eos0 = EosParams { kappa_bar: 0.0, ..eos };
        let b3 = cfl_bounds(&st, &eos0, &coeffs, 0.4, 1e-8).unwrap();
        assert!(b3.diffusive.is_infinite());

        st.rho[3] = f64::NAN;
        assert!(matches!(
            cfl_bounds(&st, &eos, &coeffs, 0.4, 1e-8),
            Err(Error::ZeroStep)
        ));
    }

    #[test]
    fn divergence_is_negative_adjoint_of_gradient() {
        let grid = Grid::new(9, 1.0);
        let c = grid.cells();
        let p: Vec<f64> = (0..c).map(|k| ((k * 7919) % 13) as f64 - 6.0).collect();
        let fx: Vec<f64> = (0..c).map(|k| ((k * 104729) % 11) as f64 - 5.0).collect();
        let fy: Vec<f64> = (0..c).map(|k| ((k * 15485863) % 17) as f64 - 8.0).collect();
        let (gx, gy) = central_gradient(&grid, &p);
        let div = central_divergence(&grid, &fx, &fy);
        let lhs: f64 = (0..c).map(|k| fx[k] * gx[k] + fy[k] * gy[k]).sum();
        let rhs: f64 = -(0..c).map(|k| p[k] * div[k]).sum::<f64>();
        assert!((lhs - rhs).abs() < 1e-10);
    }
}
