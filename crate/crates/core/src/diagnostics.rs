//! Energy ledger, entropy production, conservation totals, interface mismatch
//! and degeneracy margins.

use std::io::Write;

use crate::constitutive::{stress_work, EosParams};
use crate::fluid::interface::{bilinear, MarkerSet};
use crate::fluid::{cell_velocities, pinned_mask, velocity_gradient, FluidState};
use crate::geometry::{CoefficientFields, Displacement, GeometryConfig, Grid};
use crate::shell::{ShellSolver, ShellState};
use crate::Result;

/// Exponent `p` in the higher-integrability monitor exponents.
const INTEGRABILITY_P: f64 = 20.0;

/// `(theta_1, theta_2)` monitor exponents for adiabatic index `gamma`.
pub fn integrability_exponents(gamma: f64) -> (f64, f64) {
    let p = INTEGRABILITY_P;
    (
        ((gamma - 1.0) / 2.0 - gamma / p).min(gamma / 4.0),
        ((gamma - 1.0) / gamma - 2.0 / p).min(0.5),
    )
}

/// `(1/theta)(S:grad u + kappa |grad theta|^2 / theta)` per cell, zero where `theta = 0`.
///
/// Temperature differences are taken only towards cells that carry heat, so the
/// edge of a vacuum region does not register as a gradient.
pub fn entropy_production_density(
    grid: &Grid,
    theta: &[f64],
    ux: &[f64],
    uy: &[f64],
    eos: &EosParams,
    coeffs: &CoefficientFields,
) -> Vec<f64> {
    let n = grid.n;
    let grad = velocity_gradient(grid, ux, uy);
    let inv = 0.5 / grid.h;
    let mut out = vec![0.0; grid.cells()];
    for j in 0..n {
        for i in 0..n {
            let k = grid.index(i, j);
            let t = theta[k];
            if !(t > 0.0) {
                continue;
            }
            let nb = |ok: bool, idx: usize| if ok && theta[idx] > 0.0 { theta[idx] } else { t };
            let e = nb(i + 1 < n, k + 1);
            let w = nb(i > 0, k.wrapping_sub(1));
            let no = nb(j + 1 < n, k + n);
            let so = nb(j > 0, k.wrapping_sub(n));
            let (gx, gy) = ((e - w) * inv, (no - so) * inv);
            let (mu, eta, kappa) = eos.transport_coeffs(t, coeffs.g[k], coeffs.h[k]);
            let visc = stress_work(mu, eta, &grad[k]);
            out[k] = (visc + kappa * (gx * gx + gy * gy) / t) / t;
        }
    }
    out
}

/// `(mass, magnetic total)` as cell sums times the cell area.
pub fn conservation_totals(state: &FluidState) -> (f64, f64) {
    let a = state.grid.cell_area();
    (
        state.rho.iter().sum::<f64>() * a,
        state.b.iter().sum::<f64>() * a,
    )
}

/// `sum_j |u(x_j) - w_t(y_j) n(y_j)|^2 l_j` with bilinear velocity samples.
pub fn interface_mismatch(state: &FluidState, markers: &MarkerSet, eps_v: f64) -> f64 {
    let pinned = pinned_mask(&state.grid, &state.rho, eps_v);
    let (ux, uy) = cell_velocities(state, eps_v, &pinned);
    (0..markers.len())
        .map(|j| {
            let x = markers.points[j];
            let u = [
                bilinear(&state.grid, &ux, x).unwrap_or(0.0),
                bilinear(&state.grid, &uy, x).unwrap_or(0.0),
            ];
            let n = markers.normals[j];
            let dx = u[0] - markers.target[j] * n[0];
            let dy = u[1] - markers.target[j] * n[1];
            markers.weights[j] * (dx * dx + dy * dy)
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegeneracyReport {
    /// `min_j (w_j - alpha)`.
    pub lower: f64,
    /// `min_j (beta - w_j)`.
    pub upper: f64,
    /// Smallest surface element over the nodes; zero if it could not be computed.
    pub min_sigma: f64,
    /// Remaining monotonicity of the radial map.
    pub injectivity: f64,
}

impl DegeneracyReport {
    pub fn halt(&self) -> bool {
        !(self.lower > 0.0 && self.upper > 0.0 && self.min_sigma > 0.0 && self.injectivity > 0.0)
    }
}

pub fn degeneracy_check(w: &[f64], geometry: &GeometryConfig) -> DegeneracyReport {
    let lower = w
        .iter()
        .map(|x| x - geometry.alpha_bound)
        .fold(f64::INFINITY, f64::min);
    let upper = w
        .iter()
        .map(|x| geometry.beta_bound - x)
        .fold(f64::INFINITY, f64::min);
    let injectivity = w
        .iter()
        .map(|&x| geometry.injectivity_margin(x))
        .fold(f64::INFINITY, f64::min);
    let disp = Displacement::new(w);
    let n = w.len();
    let mut min_sigma = f64::INFINITY;
    for j in 0..n {
        match geometry.jacobian_sigma(j as f64 / n as f64, &disp) {
            Ok(s) => min_sigma = min_sigma.min(s),
            Err(_) => {
                min_sigma = 0.0;
                break;
            }
        }
    }
    DegeneracyReport {
        lower,
        upper,
        min_sigma,
        injectivity,
    }
}

/// Cumulative integrals carried across windows.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Cumulative {
    pub shell_dissipation: f64,
    pub entropy_production: f64,
    pub exterior_dissipation: f64,
    pub sink: f64,
    pub mismatch: f64,
}

/// One ledger row.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LedgerRecord {
    pub window: usize,
    pub time: f64,
    pub kinetic: f64,
    pub magnetic: f64,
    pub internal: f64,
    pub artificial: f64,
    pub shell_kinetic: f64,
    pub shell_bending: f64,
    pub shell_rotary: f64,
    pub shell_thermal: f64,
    pub total: f64,
    pub helmholtz: f64,
    pub cumulative: Cumulative,
    /// `total + shell dissipation + sink`, bounded by the initial total.
    pub energy_balance: f64,
    pub mass: f64,
    pub magnetic_total: f64,
    pub interface_mismatch: f64,
    pub rho_integrability: f64,
    pub b_integrability: f64,
    pub lower_margin: f64,
    pub upper_margin: f64,
    pub min_sigma: f64,
    pub exterior_mass_fraction: f64,
}

pub const LEDGER_COLUMNS: [&str; 27] = [
    "window",
    "time",
    "kinetic",
    "magnetic",
    "internal",
    "artificial",
    "shell_kinetic",
    "shell_bending",
    "shell_rotary",
    "shell_thermal",
    "total",
    "helmholtz",
    "shell_dissipation",
    "entropy_production",
    "exterior_dissipation",
    "sink",
    "mismatch_integral",
    "energy_balance",
    "mass",
    "magnetic_total",
    "interface_mismatch",
    "rho_integrability",
    "b_integrability",
    "lower_margin",
    "upper_margin",
    "min_sigma",
    "exterior_mass_fraction",
];

impl LedgerRecord {
    pub fn values(&self) -> [f64; 26] {
        let c = &self.cumulative;
        [
            self.time,
            self.kinetic,
            self.magnetic,
            self.internal,
            self.artificial,
            self.shell_kinetic,
            self.shell_bending,
            self.shell_rotary,
            self.shell_thermal,
            self.total,
            self.helmholtz,
            c.shell_dissipation,
            c.entropy_production,
            c.exterior_dissipation,
            c.sink,
            c.mismatch,
            self.energy_balance,
            self.mass,
            self.magnetic_total,
            self.interface_mismatch,
            self.rho_integrability,
            self.b_integrability,
            self.lower_margin,
            self.upper_margin,
            self.min_sigma,
            self.exterior_mass_fraction,
        ]
    }

    pub fn csv_row(&self) -> String {
        let mut s = self.window.to_string();
        for v in self.values() {
            s.push(',');
            s.push_str(&format!("{v:?}"));
        }
        s
    }
}

/// Everything [`total_energy`] needs besides the states.
#[derive(Debug, Clone, Copy)]
pub struct LedgerContext<'a> {
    pub eos: &'a EosParams,
    pub geometry: &'a GeometryConfig,
    pub coeffs: &'a CoefficientFields,
    pub markers: &'a MarkerSet,
    pub shell_solver: &'a ShellSolver,
    pub alpha2: f64,
    pub eps_v: f64,
}

/// Computes a ledger record by midpoint quadrature on cells and Parseval on the torus.
pub fn total_energy(
    window: usize,
    fluid: &FluidState,
    shell: &ShellState,
    ctx: &LedgerContext<'_>,
    cumulative: Cumulative,
) -> LedgerRecord {
    let eos = ctx.eos;
    let grid = fluid.grid;
    let area = grid.cell_area();
    let (t1, t2) = integrability_exponents(eos.gamma);
    let pinned = pinned_mask(&grid, &fluid.rho, ctx.eps_v);
    let (ux, uy) = cell_velocities(fluid, ctx.eps_v, &pinned);
    let disp = Displacement::new(&shell.w);
    let band = 4.0 * grid.h;
    let mut r = LedgerRecord {
        window,
        time: fluid.t,
        cumulative,
        ..Default::default()
    };
    let mut exterior_mass = 0.0;
    for k in 0..grid.cells() {
        let (rho, b, q) = (fluid.rho[k], fluid.b[k], fluid.qth[k]);
        r.kinetic += 0.5 * (fluid.mx[k] * ux[k] + fluid.my[k] * uy[k]);
        r.magnetic += 0.5 * b * b;
        r.internal += rho.powf(eos.gamma) / (eos.gamma - 1.0) + q;
        r.artificial += eos.delta / (eos.beta - 1.0) * (rho + b).powf(eos.beta);
        r.rho_integrability += rho.powf(eos.gamma + t1);
        r.b_integrability += b.powf(2.0 + t2);
        r.mass += rho;
        r.magnetic_total += b;
        if rho > 0.0 {
            let theta = eos.recover_temperature(rho, q, ctx.coeffs.f[k]);
            if theta > 0.0 {
                if let Ok(h) = eos.helmholtz_renormalized(rho, theta, ctx.coeffs.f[k]) {
                    r.helmholtz += h;
                }
            }
        }
        let x = grid.center(grid_i(&grid, k), grid_j(&grid, k));
        if ctx.geometry.radial_excess(x, &disp) > band {
            exterior_mass += rho;
        }
    }
    for v in [
        &mut r.kinetic,
        &mut r.magnetic,
        &mut r.internal,
        &mut r.artificial,
        &mut r.rho_integrability,
        &mut r.b_integrability,
        &mut r.mass,
        &mut r.magnetic_total,
        &mut r.helmholtz,
    ] {
        *v *= area;
    }
    r.exterior_mass_fraction = if r.mass > 0.0 {
        exterior_mass * area / r.mass
    } else {
        0.0
    };
    let e = ctx.shell_solver.energy(shell, ctx.alpha2);
    r.shell_kinetic = (1.0 - eos.delta) * e.kinetic;
    r.shell_bending = e.bending;
    r.shell_rotary = e.rotary;
    r.shell_thermal = e.thermal;
    r.total = r.kinetic
        + r.magnetic
        + r.internal
        + r.artificial
        + r.shell_kinetic
        + r.shell_bending
        + r.shell_rotary
        + r.shell_thermal;
    r.energy_balance = r.total + cumulative.shell_dissipation + cumulative.sink;
    r.interface_mismatch = interface_mismatch(fluid, ctx.markers, ctx.eps_v);
    let deg = degeneracy_check(&shell.w, ctx.geometry);
    r.lower_margin = deg.lower;
    r.upper_margin = deg.upper;
    r.min_sigma = deg.min_sigma;
    r
}

#[inline]
fn grid_i(grid: &Grid, k: usize) -> usize {
    k % grid.n
}

#[inline]
fn grid_j(grid: &Grid, k: usize) -> usize {
    k / grid.n
}

/// CSV ledger: header row then one record per window.
pub struct LedgerWriter<W: Write> {
    out: W,
}

impl<W: Write> LedgerWriter<W> {
    pub fn new(mut out: W) -> Result<Self> {
        writeln!(out, "{}", LEDGER_COLUMNS.join(","))?;
        Ok(Self { out })
    }

    pub fn write(&mut self, record: &LedgerRecord) -> Result<()> {
        writeln!(self.out, "{}", record.csv_row())?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}
