//! Window-by-window marching: shell substeps first, then fluid substeps.

use std::f64::consts::TAU;

use rayon::prelude::*;

use crate::config::{RunConfig, SweepEntry};
use crate::constitutive::EosParams;
use crate::diagnostics::{
    degeneracy_check, total_energy, Cumulative, LedgerContext, LedgerRecord,
};
use crate::fluid::interface::{interface_sample, MarkerSet};
use crate::fluid::{self, cell_velocities, pinned_mask, FluidParams, FluidState};
use crate::geometry::{CoefficientFields, Displacement, GeometryConfig, Grid, InterfaceMarkers};
use crate::init::{reference_eos, synthesize_initial_data};
use crate::shell::{ShellForcing, ShellParams, ShellSolver, ShellState};
use crate::{Error, Result};

/// Fluid substeps allowed in one window before giving up.
pub const MAX_SUBSTEPS_PER_WINDOW: usize = 200_000;

/// Scheme parameters; the extension multipliers are tied to `xi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterLadder {
    pub dt: f64,
    pub delta: f64,
    pub xi: f64,
    pub omega: f64,
    pub zeta: f64,
    pub lambda: f64,
    pub final_time: f64,
    pub windows: usize,
    pub eos: EosParams,
    pub alpha1: f64,
    pub alpha2: f64,
}

impl ParameterLadder {
    pub fn new(config: &RunConfig, eos: EosParams) -> Result<Self> {
        let s = &config.splitting;
        let xi = s.xi;
        let ladder = Self {
            dt: s.dt,
            delta: s.delta,
            xi,
            omega: xi * xi,
            zeta: xi * xi,
            lambda: xi.powi(6),
            final_time: s.final_time,
            windows: config.windows(),
            eos: EosParams {
                delta: s.delta,
                xi,
                ..eos
            },
            alpha1: config.shell.alpha1,
            alpha2: config.shell.alpha2,
        };
        assert!(ladder.omega == xi * xi && ladder.zeta == xi * xi && ladder.lambda == xi.powi(6));
        let n = ladder.final_time / ladder.dt;
        if (n - ladder.windows as f64).abs() > 1e-9 * n.max(1.0) {
            return Err(Error::Invalid(format!(
                "final time {} is not a whole number of windows of length {}",
                ladder.final_time, ladder.dt
            )));
        }
        Ok(ladder)
    }

    /// Penalty weight `delta / dt`.
    pub fn penalty(&self) -> f64 {
        self.delta / self.dt
    }
}

/// Shell snapshot at the end of one shell substep.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellSnapshot {
    pub t: f64,
    pub w: Vec<f64>,
    pub v: Vec<f64>,
}

/// Traces handed from one window to the next.
///
/// `fluid_trace[j]` is the averaged fluid normal velocity at the markers over
/// shell sub-interval `j` of the previous window; it is the shell penalty
/// target one window later. Before the first window it holds the initial
/// shell velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeShiftBuffer {
    pub fluid_trace: Vec<Vec<f64>>,
}

impl TimeShiftBuffer {
    pub fn initial(shell: &ShellState, substeps: usize) -> Self {
        Self {
            fluid_trace: vec![shell.v.clone(); substeps],
        }
    }

    pub fn target(&self, substep: usize) -> &[f64] {
        &self.fluid_trace[substep]
    }

    /// Replaces the contents with the traces recorded in the window just finished.
    pub fn rotate(&mut self, recorded: Vec<Vec<f64>>) {
        assert_eq!(recorded.len(), self.fluid_trace.len());
        self.fluid_trace = recorded;
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, PartialEq)]
pub enum HaltReason {
    Completed,
    Degeneracy { time: f64, detail: String },
}

impl HaltReason {
    pub fn label(&self) -> &'static str {
        match self {
            HaltReason::Completed => "completed",
            HaltReason::Degeneracy { .. } => "degeneracy",
        }
    }
}

/// Outcome of one window.
#[derive(Debug, Clone, PartialEq)]
pub enum WindowOutcome {
    Advanced(LedgerRecord),
    Degenerate { time: f64, detail: String },
}

/// Geometry-dependent data for one shell snapshot.
struct Frame {
    coeffs: CoefficientFields,
    markers: MarkerSet,
}

/// Full simulator state: fluid, shell, time-shift buffer and cumulative tallies.
pub struct Simulation {
    pub config: RunConfig,
    pub ladder: ParameterLadder,
    pub grid: Grid,
    pub fluid: FluidState,
    pub shell: ShellState,
    pub buffer: TimeShiftBuffer,
    pub cumulative: Cumulative,
    /// Windows completed so far.
    pub window: usize,
    pub substeps: usize,
    reference: InterfaceMarkers,
    solver: ShellSolver,
    fluid_params: FluidParams,
    shell_params: ShellParams,
}

fn wrap(window: usize, e: Error) -> Error {
    match e {
        Error::InWindow { .. } => e,
        other => Error::InWindow {
            window,
            source: Box::new(other),
        },
    }
}

impl Simulation {
    /// Validates `config` and synthesizes the initial data.
    pub fn new(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let (fluid, shell) = synthesize_initial_data(config)?;
        let eos = reference_eos(config, &fluid);
        let buffer = TimeShiftBuffer::initial(&shell, config.shell.substeps);
        Self::from_parts(config, eos, fluid, shell, buffer, Cumulative::default(), 0)
    }

    /// Reassembles a simulation, for example from a checkpoint.
    pub fn from_parts(
        config: &RunConfig,
        eos: EosParams,
        fluid: FluidState,
        shell: ShellState,
        buffer: TimeShiftBuffer,
        cumulative: Cumulative,
        window: usize,
    ) -> Result<Self> {
        let ladder = ParameterLadder::new(config, eos)?;
        let grid = Grid::new(config.fluid.nx, config.geometry.box_halfwidth);
        if fluid.grid != grid || shell.len() != config.shell.n_nodes {
            return Err(Error::Checkpoint("state dimensions do not match the configuration".into()));
        }
        if buffer.fluid_trace.len() != config.shell.substeps
            || buffer.fluid_trace.iter().any(|t| t.len() != shell.len())
        {
            return Err(Error::Checkpoint("time-shift buffer does not match the configuration".into()));
        }
        let mut fluid_params = FluidParams::new(ladder.eos, ladder.penalty());
        fluid_params.cfl = config.fluid.cfl;
        fluid_params.eps_v = config.fluid.eps_vacuum * config.init.rho0;
        fluid_params.kernel_halfwidth = config.fluid.kernel_halfwidth;
        let shell_params = ShellParams {
            alpha1: ladder.alpha1,
            alpha2: ladder.alpha2,
            delta: ladder.delta,
            dt: ladder.dt,
            penalty_length: TAU * config.geometry.radius,
            alpha_bound: config.geometry.alpha_bound,
            beta_bound: config.geometry.beta_bound,
        };
        Ok(Self {
            config: *config,
            ladder,
            grid,
            reference: InterfaceMarkers::new(&config.geometry, config.fluid.markers),
            solver: ShellSolver::new(config.shell.n_nodes),
            fluid,
            shell,
            buffer,
            cumulative,
            window,
            substeps: 0,
            fluid_params,
            shell_params,
        })
    }

    pub fn geometry(&self) -> &GeometryConfig {
        &self.config.geometry
    }

    pub fn eos(&self) -> &EosParams {
        &self.ladder.eos
    }

    pub fn fluid_params(&self) -> &FluidParams {
        &self.fluid_params
    }

    fn frame(&self, w: &[f64], v: &[f64]) -> Result<Frame> {
        let l = &self.ladder;
        let coeffs = self.config.geometry.coefficient_fields(
            &self.grid,
            &Displacement::new(w),
            l.omega,
            l.zeta,
            l.lambda,
        );
        let markers = MarkerSet::build(
            &self.config.geometry,
            &self.grid,
            &self.reference,
            w,
            v,
            self.config.fluid.kernel_halfwidth,
        )?;
        Ok(Frame { coeffs, markers })
    }

    /// Ledger record for the current states.
    pub fn record(&self) -> Result<LedgerRecord> {
        let frame = self.frame(&self.shell.w, &self.shell.v)?;
        let ctx = LedgerContext {
            eos: &self.ladder.eos,
            geometry: &self.config.geometry,
            coeffs: &frame.coeffs,
            markers: &frame.markers,
            shell_solver: &self.solver,
            alpha2: self.ladder.alpha2,
            eps_v: self.fluid_params.eps_v,
        };
        Ok(total_energy(self.window, &self.fluid, &self.shell, &ctx, self.cumulative))
    }

    /// Shell forcing from the fluid at the start of the window.
    fn shell_forcing(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.shell.len();
        if !self.config.shell.traction_forcing {
            return Ok((vec![0.0; n], vec![0.0; n]));
        }
        let frame = self.frame(&self.shell.w, &self.shell.v)?;
        let c = interface_sample(
            &self.fluid,
            &frame.markers,
            &self.ladder.eos,
            &frame.coeffs,
            self.fluid_params.eps_v,
        )?;
        Ok((c.normal_force(&frame.markers), c.weighted_entropy_flux(&frame.markers)))
    }

    /// Advances one window; `observer` sees the fluid after every substep.
    ///
    /// Loss of admissible geometry is reported as [`WindowOutcome::Degenerate`]
    /// and leaves the states at the last admissible shell substep.
    pub fn march_window(&mut self, observer: &mut dyn FnMut(&FluidState)) -> Result<WindowOutcome> {
        let n = self.window;
        match self.march_inner(observer) {
            Ok(outcome) => Ok(outcome),
            Err(e) if e.is_degeneracy() => Ok(WindowOutcome::Degenerate {
                time: self.shell.t.max(self.fluid.t),
                detail: e.to_string(),
            }),
            Err(e) => Err(wrap(n, e)),
        }
    }

    fn march_inner(&mut self, observer: &mut dyn FnMut(&FluidState)) -> Result<WindowOutcome> {
        let l = self.ladder;
        let substeps = self.config.shell.substeps;
        let tau_s = l.dt / substeps as f64;
        let t0 = self.window as f64 * l.dt;

        // (i) shell substeps against the previous window's fluid trace
        let (normal_force, entropy_flux) = self.shell_forcing()?;
        let mut trajectory = Vec::with_capacity(substeps);
        let mut shell = self.shell.clone();
        for j in 0..substeps {
            let forcing = ShellForcing {
                normal_force: normal_force.clone(),
                entropy_flux: entropy_flux.clone(),
                v_target: self.buffer.target(j).to_vec(),
            };
            let (next, tally) = match self.solver.step(&shell, &forcing, tau_s, &self.shell_params) {
                Ok(r) => r,
                Err(e @ Error::Degenerate(_)) => {
                    self.shell = shell;
                    return Ok(WindowOutcome::Degenerate {
                        time: self.shell.t + tau_s,
                        detail: e.to_string(),
                    });
                }
                Err(e) => return Err(e),
            };
            let deg = degeneracy_check(&next.w, &self.config.geometry);
            if deg.halt() {
                self.shell = shell;
                return Ok(WindowOutcome::Degenerate {
                    time: next.t,
                    detail: format!(
                        "margins lower {:.3e}, upper {:.3e}, sigma {:.3e}, injectivity {:.3e}",
                        deg.lower, deg.upper, deg.min_sigma, deg.injectivity
                    ),
                });
            }
            self.cumulative.shell_dissipation += tally.dissipation;
            shell = next;
            trajectory.push(ShellSnapshot {
                t: t0 + (j + 1) as f64 * tau_s,
                w: shell.w.clone(),
                v: shell.v.clone(),
            });
        }
        // snap accumulated time to the window grid
        shell.t = t0 + l.dt;

        // (ii) fluid substeps against the just-computed shell trajectory
        let mut recorded = Vec::with_capacity(substeps);
        let mut t = t0;
        let mut count = 0usize;
        for (j, snap) in trajectory.iter().enumerate() {
            let frame = self.frame(&snap.w, &snap.v)?;
            let t_end = if j + 1 == substeps { t0 + l.dt } else { snap.t };
            let mut trace = vec![0.0; shell.len()];
            let span = t_end - t;
            while t < t_end {
                let stable = fluid::stable_step(&self.fluid, &self.fluid_params, &frame.coeffs)?;
                let remaining = t_end - t;
                let tau = if stable >= remaining * (1.0 - 1e-12) { remaining } else { stable };
                if !(tau > 0.0) {
                    return Err(Error::ZeroStep);
                }
                let tally =
                    fluid::substep(&mut self.fluid, &self.fluid_params, &frame.coeffs, &frame.markers, tau)?;
                t = if tau == remaining { t_end } else { t + tau };
                self.fluid.t = t;
                self.cumulative.entropy_production += tally.entropy_production;
                self.cumulative.exterior_dissipation += tally.exterior_dissipation;
                self.cumulative.sink += tally.sink;
                self.cumulative.mismatch += tally.mismatch;
                self.accumulate_trace(&frame.markers, tau, &mut trace);
                observer(&self.fluid);
                count += 1;
                if count > MAX_SUBSTEPS_PER_WINDOW {
                    return Err(Error::SubstepLimit {
                        limit: MAX_SUBSTEPS_PER_WINDOW,
                    });
                }
            }
            if span > 0.0 {
                trace.iter_mut().for_each(|x| *x /= span);
            }
            recorded.push(trace);
        }
        self.substeps += count;

        // (iii) hand-off
        self.shell = shell;
        self.buffer.rotate(recorded);
        self.window += 1;
        Ok(WindowOutcome::Advanced(self.record()?))
    }

    /// Adds `tau * (U_j . n_j)` with kernel-sampled fluid velocity.
    fn accumulate_trace(&self, markers: &MarkerSet, tau: f64, trace: &mut [f64]) {
        let pinned = pinned_mask(&self.grid, &self.fluid.rho, self.fluid_params.eps_v);
        let (ux, uy) = cell_velocities(&self.fluid, self.fluid_params.eps_v, &pinned);
        let sx = markers.sample(&ux);
        let sy = markers.sample(&uy);
        for (j, tr) in trace.iter_mut().enumerate() {
            let n = markers.normals[j];
            *tr += tau * (sx[j] * n[0] + sy[j] * n[1]);
        }
    }
}

/// Result of [`run`].
#[derive(Debug, Clone)]
pub struct RunReport {
    pub halt: HaltReason,
    pub windows: usize,
    pub final_time: f64,
    pub substeps: usize,
    pub ledger: Vec<LedgerRecord>,
    pub fluid: FluidState,
    pub shell: ShellState,
}

/// Marches a simulation to its final time or to a degeneracy halt.
///
/// `sink` receives record 0 and one record per completed window.
pub fn run_simulation(
    sim: &mut Simulation,
    sink: &mut dyn FnMut(&LedgerRecord) -> Result<()>,
    observer: &mut dyn FnMut(&FluidState),
) -> Result<RunReport> {
    let mut ledger = vec![sim.record()?];
    sink(&ledger[0])?;
    let mut halt = HaltReason::Completed;
    while sim.window < sim.ladder.windows {
        match sim.march_window(observer)? {
            WindowOutcome::Advanced(rec) => {
                sink(&rec)?;
                ledger.push(rec);
            }
            WindowOutcome::Degenerate { time, detail } => {
                halt = HaltReason::Degeneracy { time, detail };
                break;
            }
        }
    }
    Ok(RunReport {
        halt,
        windows: sim.window,
        final_time: sim.fluid.t,
        substeps: sim.substeps,
        ledger,
        fluid: sim.fluid.clone(),
        shell: sim.shell.clone(),
    })
}

/// Runs `config` from its synthesized initial data.
pub fn run(config: &RunConfig) -> Result<RunReport> {
    let mut sim = Simulation::new(config)?;
    run_simulation(&mut sim, &mut |_| Ok(()), &mut |_| {})
}

/// Figures collected from one sweep entry.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub halt: String,
    pub windows: usize,
    pub cumulative: Cumulative,
    pub mass_drift: f64,
    pub magnetic_drift: f64,
    pub max_energy_excess: f64,
    pub final_exterior_mass_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub entry: SweepEntry,
    pub result: std::result::Result<SweepSummary, String>,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub outcomes: Vec<SweepOutcome>,
    /// Log-log slope of the mismatch integral against `dt`.
    pub mismatch_slope: Option<f64>,
    /// Log-log slope of the exterior dissipation against `xi`.
    pub exterior_slope: Option<f64>,
}

fn relative_drift(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        b.abs()
    } else {
        ((b - a) / a).abs()
    }
}

/// Summarizes a finished run.
pub fn summarize(report: &RunReport) -> SweepSummary {
    let first = &report.ledger[0];
    let last = report.ledger.last().unwrap_or(first);
    let max_energy_excess = report
        .ledger
        .iter()
        .map(|r| r.energy_balance / first.total - 1.0)
        .fold(f64::NEG_INFINITY, f64::max);
    SweepSummary {
        halt: report.halt.label().to_string(),
        windows: report.windows,
        cumulative: last.cumulative,
        mass_drift: relative_drift(first.mass, last.mass),
        magnetic_drift: relative_drift(first.magnetic_total, last.magnetic_total),
        max_energy_excess,
        final_exterior_mass_fraction: last.exterior_mass_fraction,
    }
}

/// Least-squares slope of `ln y` against `ln x` over positive pairs.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// Runs every entry in parallel from identical initial data; failed entries are kept and marked.
pub fn ladder_sweep(config: &RunConfig, entries: &[SweepEntry]) -> SweepReport {
    ladder_sweep_with(config, entries, |_, c| run(c))
}

/// [`ladder_sweep`] with a custom runner receiving the entry index.
pub fn ladder_sweep_with<F>(config: &RunConfig, entries: &[SweepEntry], runner: F) -> SweepReport
where
    F: Fn(usize, &RunConfig) -> Result<RunReport> + Sync,
{
    let outcomes: Vec<SweepOutcome> = entries
        .par_iter()
        .enumerate()
        .map(|(k, &entry)| {
            let result = config
                .with_ladder(entry.dt, entry.xi)
                .and_then(|c| runner(k, &c))
                .map(|r| summarize(&r))
                .map_err(|e| e.to_string());
            SweepOutcome { entry, result }
        })
        .collect();
    let ok = || outcomes.iter().filter_map(|o| o.result.as_ref().ok().map(|s| (o.entry, s)));
    let mismatch: Vec<(f64, f64)> = ok().map(|(e, s)| (e.dt, s.cumulative.mismatch)).collect();
    let exterior: Vec<(f64, f64)> = ok().map(|(e, s)| (e.xi, s.cumulative.exterior_dissipation)).collect();
    SweepReport {
        mismatch_slope: loglog_slope(&mismatch),
        exterior_slope: loglog_slope(&exterior),
        outcomes,
    }
}
