use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the simulator and its I/O layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("projection is undefined at the centre of the reference circle")]
    DegeneratePoint,
    #[error("inverse flow map did not converge after {iterations} Newton iterations at ({x}, {y})")]
    NoConvergence { iterations: usize, x: f64, y: f64 },
    #[error("deformation degenerates: {0}")]
    Degenerate(String),
    #[error("vacuum state: {0}")]
    Vacuum(&'static str),
    #[error("thermodynamic domain error: {0}")]
    Domain(&'static str),
    #[error("CFL violation: outflow Courant number {courant:.4} exceeds 1")]
    Cfl { courant: f64 },
    #[error("non-finite value detected in {field} at cell {cell}")]
    NotFinite { field: &'static str, cell: usize },
    #[error("marker {marker} at ({x:.4}, {y:.4}) lies outside the grid interior")]
    MarkerOutOfGrid { marker: usize, x: f64, y: f64 },
    #[error("linear solver ({which}) stalled after {iterations} iterations, residual {residual:e}")]
    SolverStalled { which: &'static str, iterations: usize, residual: f64 },
    #[error("substep limit of {limit} exceeded")]
    SubstepLimit { limit: usize },
    #[error("singular per-mode shell system at mode {mode}")]
    SingularShell { mode: usize },
    #[error("time step collapsed to zero")]
    ZeroStep,
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("infeasible initial data: {0}")]
    Infeasible(String),
    #[error("checkpoint mismatch: {0}")]
    Checkpoint(String),
    #[error("window {window}: {source}")]
    InWindow {
        window: usize,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures that signal loss of admissible geometry rather than a bug.
    pub fn is_degeneracy(&self) -> bool {
        match self {
            Error::Degenerate(_) | Error::NoConvergence { .. } => true,
            Error::InWindow { source, .. } => source.is_degeneracy(),
            _ => false,
        }
    }
}
