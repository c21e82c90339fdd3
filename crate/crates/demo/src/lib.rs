//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every function returns flat `f64` arrays so the page can draw them without
//! any glue beyond the generated bindings.

use std::f64::consts::TAU;

use wasm_bindgen::prelude::*;

use mhdshell::constitutive::EosParams;
use mhdshell::geometry::{Displacement, GeometryConfig};
use mhdshell::shell::{ShellForcing, ShellParams, ShellSolver, ShellState};

fn mode_displacement(amplitude: f64, mode: u32, nodes: usize) -> Vec<f64> {
    (0..nodes)
        .map(|j| amplitude * (TAU * mode as f64 * j as f64 / nodes as f64).cos())
        .collect()
}

/// Deformed boundary for `w = amplitude cos(2 pi mode y)` as `x0, y0, x1, y1, ...`,
/// followed by the images of `rings` concentric reference circles.
///
/// Returns an empty array when the flow map is not defined.
#[wasm_bindgen]
pub fn deformed_curves(amplitude: f64, mode: u32, samples: usize, rings: usize) -> Vec<f64> {
    let geo = GeometryConfig::default();
    let w = mode_displacement(amplitude, mode, 128);
    let disp = Displacement::new(&w);
    let mut out = Vec::with_capacity(2 * samples * (rings + 1));
    let radii = std::iter::once(geo.radius).chain((1..=rings).map(|k| {
        let s = k as f64 / (rings + 1) as f64;
        geo.radius * (1.0 + geo.cutoff.inner_support + s * (geo.cutoff.outer_support - geo.cutoff.inner_support))
    }));
    for r in radii {
        for j in 0..samples {
            let a = TAU * j as f64 / samples as f64;
            match geo.flow_map([r * a.cos(), r * a.sin()], &disp) {
                Ok(z) => out.extend_from_slice(&z),
                Err(_) => return Vec::new(),
            }
        }
    }
    out
}

/// Smallest injectivity margin of the radial flow map for the given amplitude.
#[wasm_bindgen]
pub fn injectivity_margin(amplitude: f64) -> f64 {
    GeometryConfig::default().injectivity_margin(amplitude)
}

/// Pressure and specific internal energy against density at fixed temperature,
/// as `rho, p, e` triples.
#[wasm_bindgen]
pub fn eos_curves(theta: f64, radiation: f64, rho_max: f64, samples: usize) -> Vec<f64> {
    let eos = EosParams {
        a: radiation.max(0.0),
        ..EosParams::default()
    };
    let mut out = Vec::with_capacity(3 * samples);
    for k in 1..=samples {
        let rho = rho_max * k as f64 / samples as f64;
        out.push(rho);
        out.push(eos.pressure(rho, theta, 1.0));
        out.push(eos.internal_energy(rho, theta, 1.0).unwrap_or(f64::NAN));
    }
    out
}

/// Free vibration of one shell mode; returns `t, kinetic, bending, rotary, thermal` per step.
#[wasm_bindgen]
pub fn shell_energy_history(mode: u32, alpha1: f64, alpha2: f64, tau: f64, steps: usize) -> Vec<f64> {
    let n = 64;
    let solver = ShellSolver::new(n);
    let params = ShellParams {
        alpha1: alpha1.max(0.0),
        alpha2: alpha2.max(0.0),
        ..ShellParams::default()
    };
    let mut state = ShellState::zeros(n);
    state.w = mode_displacement(0.01, mode, n);
    state.theta.fill(0.0);
    let forcing = ShellForcing::zeros(n);
    let mut out = Vec::with_capacity(5 * (steps + 1));
    let mut push = |s: &ShellState| {
        let e = solver.energy(s, params.alpha2);
        out.extend_from_slice(&[s.t, e.kinetic, e.bending, e.rotary, e.thermal]);
    };
    push(&state);
    for _ in 0..steps {
        match solver.step(&state, &forcing, tau, &params) {
            Ok((next, _)) => state = next,
            Err(_) => break,
        }
        push(&state);
    }
    out
}
