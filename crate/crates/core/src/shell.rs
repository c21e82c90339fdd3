//! Linear thermoelastic shell on the unit torus, advanced by mode-diagonal
//! backward Euler with the splitting penalty.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ShellState {
    pub w: Vec<f64>,
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
    pub t: f64,
}

impl ShellState {
    pub fn zeros(n: usize) -> Self {
        Self {
            w: vec![0.0; n],
            v: vec![0.0; n],
            theta: vec![0.0; n],
            t: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    /// Node positions `y_j = j / N` on the torus.
    pub fn nodes(&self) -> impl Iterator<Item = f64> {
        let n = self.len();
        (0..n).map(move |j| j as f64 / n as f64)
    }
}

/// Per-node forcing held fixed over a substep.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellForcing {
    /// Normal surface force, already weighted by the surface element.
    pub normal_force: Vec<f64>,
    /// Entropy flux, already weighted by the surface element.
    pub entropy_flux: Vec<f64>,
    /// Penalty target velocity from the previous window.
    pub v_target: Vec<f64>,
}

impl ShellForcing {
    pub fn zeros(n: usize) -> Self {
        Self {
            normal_force: vec![0.0; n],
            entropy_flux: vec![0.0; n],
            v_target: vec![0.0; n],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShellParams {
    pub alpha1: f64,
    pub alpha2: f64,
    pub delta: f64,
    /// Window length `dt` in the penalty weight `delta / dt`.
    pub dt: f64,
    /// Length factor multiplying the penalty weight; the physical perimeter
    /// when the torus measure must match the fluid-side surface measure.
    pub penalty_length: f64,
    pub alpha_bound: f64,
    pub beta_bound: f64,
}

impl Default for ShellParams {
    fn default() -> Self {
        Self {
            alpha1: 0.5,
            alpha2: 0.1,
            delta: 0.0,
            dt: 1.0,
            penalty_length: 1.0,
            alpha_bound: f64::NEG_INFINITY,
            beta_bound: f64::INFINITY,
        }
    }
}

/// Energy quadruple on the torus: `(1/2|v|^2, 1/2|Lap w|^2, alpha2/2 |grad v|^2, |theta|^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    pub bending: f64,
    pub rotary: f64,
    pub thermal: f64,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.kinetic + self.bending + self.rotary + self.thermal
    }
}

/// Work done in one step, for the ledger.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepTally {
    /// `tau (alpha1 |grad v+|^2 + |grad theta+|^2)`.
    pub dissipation: f64,
}

/// Periodic Laplacian symbol `-(2 pi k)^2`.
pub fn laplacian_symbol(k: i64) -> f64 {
    -(TAU * k as f64).powi(2)
}

/// FFT plans and the mode table for a fixed node count.
#[derive(Clone)]
pub struct ShellSolver {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    symbols: Vec<f64>,
}

impl fmt::Debug for ShellSolver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ShellSolver").field("n", &self.n).finish()
    }
}

impl ShellSolver {
    pub fn new(n: usize) -> Self {
        assert!(n >= 2, "shell needs at least two nodes");
        let mut planner = FftPlanner::new();
        let symbols = (0..n).map(|k| laplacian_symbol(wavenumber(k, n))).collect();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            symbols,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Symbol of the Laplacian for FFT bin `k`.
    pub fn symbol(&self, k: usize) -> f64 {
        self.symbols[k]
    }

    pub fn to_modes(&self, x: &[f64]) -> Vec<Complex<f64>> {
        assert_eq!(x.len(), self.n);
        let mut buf: Vec<Complex<f64>> = x.iter().map(|&r| Complex::new(r, 0.0)).collect();
        self.forward.process(&mut buf);
        buf
    }

    pub fn from_modes(&self, mut modes: Vec<Complex<f64>>) -> Vec<f64> {
        self.inverse.process(&mut modes);
        let scale = 1.0 / self.n as f64;
        modes.into_iter().map(|c| c.re * scale).collect()
    }

    /// Applies `symbol(k)^power` mode by mode.
    fn apply(&self, x: &[f64], power: i32) -> Vec<f64> {
        let mut m = self.to_modes(x);
        for (c, s) in m.iter_mut().zip(&self.symbols) {
            *c *= s.powi(power);
        }
        self.from_modes(m)
    }

    pub fn laplacian(&self, x: &[f64]) -> Vec<f64> {
        self.apply(x, 1)
    }

    /// `sum_k weight(k) |x_hat_k|^2 / N^2`, the Parseval form of an L2 norm on the torus.
    fn spectral_norm_sq(&self, x: &[f64], power: i32) -> f64 {
        let m = self.to_modes(x);
        let n2 = (self.n * self.n) as f64;
        m.iter()
            .zip(&self.symbols)
            .map(|(c, s)| s.abs().powi(power) * c.norm_sqr())
            .sum::<f64>()
            / n2
    }

    pub fn energy(&self, state: &ShellState, alpha2: f64) -> EnergyBreakdown {
        let n = self.n as f64;
        EnergyBreakdown {
            kinetic: 0.5 * state.v.iter().map(|x| x * x).sum::<f64>() / n,
            bending: 0.5 * self.spectral_norm_sq(&state.w, 2),
            rotary: 0.5 * alpha2 * self.spectral_norm_sq(&state.v, 1),
            thermal: state.theta.iter().map(|x| x * x).sum::<f64>() / n,
        }
    }

    /// `|grad x|^2` on the torus.
    pub fn gradient_norm_sq(&self, x: &[f64]) -> f64 {
        self.spectral_norm_sq(x, 1)
    }

    /// One backward-Euler step of length `tau`.
    pub fn step(
        &self,
        state: &ShellState,
        forcing: &ShellForcing,
        tau: f64,
        p: &ShellParams,
    ) -> Result<(ShellState, StepTally)> {
        if !(tau > 0.0) {
            return Err(Error::ZeroStep);
        }
        assert!(p.delta < 1.0 && p.alpha1 >= 0.0 && p.alpha2 >= 0.0);
        let pen = p.delta / p.dt * p.penalty_length;
        let w = self.to_modes(&state.w);
        let v = self.to_modes(&state.v);
        let th = self.to_modes(&state.theta);
        let f = self.to_modes(&forcing.normal_force);
        let q = self.to_modes(&forcing.entropy_flux);
        let vt = self.to_modes(&forcing.v_target);
        let mut v_new = vec![Complex::new(0.0, 0.0); self.n];
        let mut th_new = vec![Complex::new(0.0, 0.0); self.n];
        for k in 0..self.n {
            let s = self.symbols[k];
            let a11 = (1.0 - p.delta) / tau + s * s * tau - p.alpha1 * s - p.alpha2 * s / tau + pen;
            let a12 = s;
            let a21 = -s;
            let a22 = 1.0 / tau - s;
            let det = a11 * a22 - a12 * a21;
            if !(det > 0.0) || !det.is_finite() {
                return Err(Error::SingularShell { mode: k });
            }
            let r1 = f[k] + v[k] * ((1.0 - p.delta) / tau) - w[k] * (s * s)
                - v[k] * (p.alpha2 * s / tau)
                + vt[k] * pen;
            let r2 = q[k] + th[k] / tau;
            v_new[k] = (r1 * a22 - r2 * a12) / det;
            th_new[k] = (r2 * a11 - r1 * a21) / det;
        }
        let v_next = self.from_modes(v_new);
        let theta_next = self.from_modes(th_new);
        let w_next: Vec<f64> = state
            .w
            .iter()
            .zip(&v_next)
            .map(|(w, v)| w + tau * v)
            .collect();
        let tally = StepTally {
            dissipation: tau
                * (p.alpha1 * self.gradient_norm_sq(&v_next) + self.gradient_norm_sq(&theta_next)),
        };
        let next = ShellState {
            w: w_next,
            v: v_next,
            theta: theta_next,
            t: state.t + tau,
        };
        if let Some((j, &wj)) = next
            .w
            .iter()
            .enumerate()
            .find(|(_, &x)| !(x > p.alpha_bound && x < p.beta_bound))
        {
            return Err(Error::Degenerate(format!(
                "shell displacement {wj:.6} at node {j} left the admissible range at t = {:.6}",
                next.t
            )));
        }
        Ok((next, tally))
    }
}

/// Signed wavenumber of FFT bin `k` for `n` samples.
pub fn wavenumber(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples(n: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..n).map(|j| f(j as f64 / n as f64)).collect()
    }

    #[test]
    fn symbol_examples() {
        assert_eq!(laplacian_symbol(0), 0.0);
        assert_eq!(laplacian_symbol(1), -4.0 * std::f64::consts::PI.powi(2));
        let s = ShellSolver::new(64);
        let c = samples(64, |y| (TAU * y).cos());
        let lap = s.laplacian(&c);
        for (l, c) in lap.iter().zip(&c) {
            assert!((l - laplacian_symbol(1) * c).abs() < 1e-12 * TAU * TAU);
        }
    }

    #[test]
    fn zero_state_is_fixed() {
        let s = ShellSolver::new(32);
        let st = ShellState::zeros(32);
        let (next, tally) = s
            .step(&st, &ShellForcing::zeros(32), 0.01, &ShellParams::default())
            .unwrap();
        assert_eq!(next.w, st.w);
        assert_eq!(next.v, st.v);
        assert_eq!(next.theta, st.theta);
        assert_eq!(tally.dissipation, 0.0);
    }

    #[test]
    fn dominant_penalty_drives_velocity_to_target() {
        let n = 32;
        let s = ShellSolver::new(n);
        let mut st = ShellState::zeros(n);
        st.v = samples(n, |y| 0.3 * (TAU * y).sin());
        let mut forcing = ShellForcing::zeros(n);
        forcing.v_target = vec![0.7; n];
        let p = ShellParams { delta: 0.5, dt: 0.5e-6, ..Default::default() };
        let (next, _) = s.step(&st, &forcing, 1e-2, &p).unwrap();
        for v in &next.v {
            assert!((v - 0.7).abs() < 1e-3 * 0.7);
        }
    }

    #[test]
    fn energy_examples() {
        let n = 64;
        let s = ShellSolver::new(n);
        let e = s.energy(&ShellState::zeros(n), 0.1);
        assert_eq!(e.total(), 0.0);
        let mut st = ShellState::zeros(n);
        st.w = samples(n, |y| (TAU * y).sin());
        let e = s.energy(&st, 0.1);
        let pi4 = std::f64::consts::PI.powi(4);
        assert!((e.bending - 4.0 * pi4).abs() < 1e-10 * pi4);
        let mut st = ShellState::zeros(n);
        st.v = vec![1.0; n];
        let e = s.energy(&st, 1.0);
        assert_eq!((e.kinetic, e.bending, e.thermal), (0.5, 0.0, 0.0));
        assert!(e.rotary.abs() < 1e-20);
    }

    #[test]
    fn free_vibration_energy_decays() {
        let n = 32;
        let s = ShellSolver::new(n);
        let mut st = ShellState::zeros(n);
        st.w = samples(n, |y| 0.01 * (2.0 * TAU * y).cos());
        st.theta = samples(n, |y| 0.1 * (TAU * y).sin());
        let p = ShellParams::default();
        let mut e0 = s.energy(&st, p.alpha2).total();
        for _ in 0..200 {
            st = s.step(&st, &ShellForcing::zeros(n), 1e-3, &p).unwrap().0;
            let e = s.energy(&st, p.alpha2).total();
            assert!(e <= e0 * (1.0 + 1e-14));
            e0 = e;
        }
    }

    #[test]
    fn mean_mode_decouples() {
        let n = 16;
        let s = ShellSolver::new(n);
        let mut st = ShellState::zeros(n);
        st.w = samples(n, |y| 0.02 + 0.01 * (TAU * y).cos());
        st.v = vec![0.5; n];
        let p = ShellParams::default();
        let (next, _) = s.step(&st, &ShellForcing::zeros(n), 0.01, &p).unwrap();
        let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
        assert!((mean(&next.v) - 0.5).abs() < 1e-14);
        assert!((mean(&next.w) - (0.02 + 0.005)).abs() < 1e-14);
    }

    #[test]
    fn leaving_bounds_is_degeneracy() {
        let n = 16;
        let s = ShellSolver::new(n);
        let mut st = ShellState::zeros(n);
        st.v = vec![-10.0; n];
        let p = ShellParams { alpha_bound: -0.5, beta_bound: 0.5, ..Default::default() };
        let err = s.step(&st, &ShellForcing::zeros(n), 0.1, &p).unwrap_err();
        assert!(err.is_degeneracy());
    }
}
