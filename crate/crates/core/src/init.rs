//! Initial data recipes.

use std::f64::consts::TAU;

use crate::config::{Recipe, RunConfig};
use crate::constitutive::EosParams;
use crate::fluid::FluidState;
use crate::geometry::{norm, Grid};
use crate::shell::ShellState;
use crate::{Error, Result};

/// Hermite smoothstep on `[0, 1]`, clamped outside.
fn smoothstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * (3.0 - 2.0 * s)
}

/// Mollified indicator of the reference disk: zero within `band` of the
/// circle and outside it, one deeper than `band + ramp`.
pub fn support_profile(radius: f64, band: f64, ramp: f64, x: [f64; 2]) -> f64 {
    let depth = radius - norm(x);
    smoothstep((depth - band) / ramp)
}

fn gaussian(x: [f64; 2], centre: [f64; 2], width: f64) -> f64 {
    let dx = x[0] - centre[0];
    let dy = x[1] - centre[1];
    (-(dx * dx + dy * dy) / (2.0 * width * width)).exp()
}

/// Builds the fluid and shell states at `t = 0`.
///
/// The equilibrium recipe fills the whole box with a uniform state so that it
/// is a fixed point of both substeps; every other recipe is supported strictly
/// inside the reference domain with an empty band next to the interface.
pub fn synthesize_initial_data(config: &RunConfig) -> Result<(FluidState, ShellState)> {
    let geo = &config.geometry;
    let init = &config.init;
    let grid = Grid::new(config.fluid.nx, geo.box_halfwidth);
    let r0 = geo.radius;
    let band = init.band_cells * grid.h;
    let ramp = 0.2 * r0;
    if band + ramp >= 0.9 * r0 {
        return Err(Error::Infeasible(format!(
            "empty band {band:.4} plus ramp {ramp:.4} leaves no support inside radius {r0}"
        )));
    }
    let mut fluid = FluidState::zeros(grid);
    let n_nodes = config.shell.n_nodes;
    let mut shell = ShellState::zeros(n_nodes);
    shell.theta.fill(init.shell_theta0);
    let bump_centre = [0.3 * r0, 0.0];
    let bump_width = 0.15 * r0;
    let a = init.amplitude;
    for j in 0..grid.n {
        for i in 0..grid.n {
            let k = grid.index(i, j);
            let x = grid.center(i, j);
            let chi = support_profile(r0, band, ramp, x);
            let bump = gaussian(x, bump_centre, bump_width);
            let (rho, b) = match init.recipe {
                Recipe::Equilibrium => (init.rho0, 0.0),
                Recipe::DensityBump => (init.rho0 * chi * (1.0 + a * bump), init.b0 * chi),
                Recipe::MagneticBump => (init.rho0 * chi, init.b0 * chi * (1.0 + a * bump)),
                Recipe::ShellKick | Recipe::Collapse => (init.rho0 * chi, init.b0 * chi),
            };
            fluid.rho[k] = rho;
            fluid.b[k] = b;
        }
    }
    match init.recipe {
        Recipe::ShellKick => {
            for (j, y) in shell.nodes().enumerate().collect::<Vec<_>>() {
                shell.v[j] = a * (TAU * y).sin();
            }
        }
        Recipe::Collapse => shell.v.fill(-a),
        _ => {}
    }
    let eos = reference_eos(config, &fluid);
    // thermal energy follows the support so the temperature vanishes with the density
    let lambda = config.splitting.xi.powi(6);
    for j in 0..grid.n {
        for i in 0..grid.n {
            let k = grid.index(i, j);
            if fluid.rho[k] <= 0.0 {
                continue;
            }
            let chi = match init.recipe {
                Recipe::Equilibrium => 1.0,
                _ => support_profile(r0, band, ramp, grid.center(i, j)),
            };
            let f = if norm(grid.center(i, j)) < r0 { 1.0 } else { lambda };
            let bulk = fluid.rho[k] / chi;
            fluid.qth[k] = chi * eos.thermal_energy(bulk, init.theta0, f);
        }
    }
    Ok((fluid, shell))
}

/// EOS with `rho_ref` resolved to the mean density over the box unless given.
pub fn reference_eos(config: &RunConfig, fluid: &FluidState) -> EosParams {
    let mut eos = config.eos;
    if !config.rho_ref_given {
        let mean = fluid.rho.iter().sum::<f64>() / fluid.rho.len() as f64;
        if mean > 0.0 {
            eos.rho_ref = mean;
        }
    }
    eos
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Displacement;

    fn config(recipe: Recipe) -> RunConfig {
        let mut c = RunConfig::default();
        c.fluid.nx = 48;
        c.init.recipe = recipe;
        c
    }

    #[test]
    fn equilibrium_is_uniform_and_at_rest() {
        let (f, s) = synthesize_initial_data(&config(Recipe::Equilibrium)).unwrap();
        assert!(f.rho.iter().all(|&r| r == 1.0));
        assert!(f.b.iter().all(|&b| b == 0.0));
        assert!(f.mx.iter().chain(&f.my).all(|&m| m == 0.0));
        assert!(s.w.iter().chain(&s.v).all(|&x| x == 0.0));
    }

    #[test]
    fn bump_support_is_inside_reference_domain() {
        for recipe in [Recipe::DensityBump, Recipe::MagneticBump, Recipe::ShellKick, Recipe::Collapse] {
            let c = config(recipe);
            let (f, s) = synthesize_initial_data(&c).unwrap();
            let disp = Displacement::new(&s.w);
            let grid = f.grid;
            for j in 0..grid.n {
                for i in 0..grid.n {
                    let k = grid.index(i, j);
                    let x = grid.center(i, j);
                    if f.rho[k] > 0.0 || f.b[k] > 0.0 {
                        assert!(c.geometry.inside(x, &disp).unwrap());
                        // at least two cells of empty band
                        assert!(c.geometry.radius - norm(x) > 2.0 * grid.h);
                    } else {
                        assert_eq!((f.mx[k], f.my[k], f.qth[k]), (0.0, 0.0, 0.0));
                    }
                    assert!(f.rho[k] >= 0.0 && f.b[k] >= 0.0);
                }
            }
        }
    }

    #[test]
    fn temperature_is_positive_on_support() {
        let c = config(Recipe::DensityBump);
        let (f, _) = synthesize_initial_data(&c).unwrap();
        let eos = reference_eos(&c, &f);
        for k in 0..f.rho.len() {
            if f.rho[k] > 0.0 {
                let t = eos.recover_temperature(f.rho[k], f.qth[k], 1.0);
                assert!(t > 0.0 && t <= c.init.theta0 * (1.0 + 1e-12));
            }
        }
        assert!(eos.rho_ref > 0.0);
    }

    #[test]
    fn shell_kick_profile() {
        let mut c = config(Recipe::ShellKick);
        c.init.amplitude = 0.1;
        let (_, s) = synthesize_initial_data(&c).unwrap();
        let n = s.len();
        assert!((s.v[n / 4] - 0.1).abs() < 1e-14);
        assert!(s.w.iter().all(|&w| w == 0.0));
        assert!(s.theta.iter().all(|&t| t == 1.0));
    }

    #[test]
    fn oversized_band_is_infeasible() {
        let mut c = config(Recipe::DensityBump);
        c.init.band_cells = 40.0;
        assert!(matches!(synthesize_initial_data(&c), Err(Error::Infeasible(_))));
    }
}
