//! Desk-scale simulator for a two-dimensional compressible, heat-conducting,
//! non-resistive MHD fluid enclosed by a one-dimensional thermoelastic shell.
//!
//! The fluid lives on a fixed Cartesian box that contains every admissible
//! deformed domain. Transport coefficients are tapered outside the physical
//! domain, the kinematic coupling is enforced by a penalty of strength
//! `delta / dt`, and structure and fluid are advanced alternately inside
//! each window of length `dt`.

pub mod checkpoint;
pub mod config;
pub mod constitutive;
pub mod diagnostics;
pub mod error;
pub mod fluid;
pub mod geometry;
pub mod init;
pub mod output;
pub mod shell;
pub mod splitting;
pub mod validate;

pub use error::{Error, Result};

/// A point or vector in the plane.
pub type Vec2 = [f64; 2];

/// A 2x2 tensor stored row-major: `t[i][j]`.
pub type Tensor2 = [[f64; 2]; 2];
