//! Self-check suite behind the `validate` subcommand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::constitutive::{stress_work, EosParams};
use crate::fluid::transport::FaceVelocities;
use crate::geometry::{norm, Displacement, GeometryConfig, Grid};

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyResult {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed value, compared against `tolerance`.
    pub worst: f64,
    pub tolerance: f64,
}

impl std::fmt::Display for PropertyResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {}: worst {:e} (tolerance {:e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.worst,
            self.tolerance
        )
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// Largest relative defect of the two partial Gibbs identities
/// `theta s_theta = e_theta` and `theta s_rho = e_rho - p / rho^2`,
/// by central differences on an `n x n` grid over `[0.1, 5]^2`.
pub fn gibbs_defect(eos: &EosParams, n: usize) -> f64 {
    let f = 1.0;
    let e = |r: f64, t: f64| eos.internal_energy(r, t, f).expect("rho > 0");
    let s = |r: f64, t: f64| eos.entropy(r, t, f).expect("rho, theta > 0");
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let rho = 0.1 + 4.9 * i as f64 / (n - 1) as f64;
            let theta = 0.1 + 4.9 * j as f64 / (n - 1) as f64;
            let hr = 1e-5 * rho;
            let ht = 1e-5 * theta;
            let e_t = (e(rho, theta + ht) - e(rho, theta - ht)) / (2.0 * ht);
            let s_t = (s(rho, theta + ht) - s(rho, theta - ht)) / (2.0 * ht);
            let e_r = (e(rho + hr, theta) - e(rho - hr, theta)) / (2.0 * hr);
            let s_r = (s(rho + hr, theta) - s(rho - hr, theta)) / (2.0 * hr);
            let p = eos.pressure(rho, theta, f);
            worst = worst
                .max(rel(theta * s_t, e_t))
                .max(rel(theta * s_r, e_r - p / (rho * rho)));
        }
    }
    worst
}

/// Most negative `S : grad u` over random gradients, temperatures and taper values.
pub fn stress_positivity(eos: &EosParams, seed: u64, samples: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..samples {
        let g: [[f64; 2]; 2] = [
            [rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)],
            [rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)],
        ];
        let theta = rng.random_range(0.0..5.0);
        let taper = rng.random_range(1e-4..1.0);
        let (mu, eta, _) = eos.transport_coeffs(theta, taper, taper);
        worst = worst.min(stress_work(mu, eta, &g));
    }
    worst
}

/// Random smooth admissible displacement with `|w| <= amplitude`.
pub fn random_displacement(rng: &mut ChaCha8Rng, nodes: usize, amplitude: f64) -> Vec<f64> {
    let modes = 4;
    let coeffs: Vec<(f64, f64)> = (0..modes)
        .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(0.0..std::f64::consts::TAU)))
        .collect();
    let scale = amplitude / modes as f64;
    (0..nodes)
        .map(|j| {
            let y = j as f64 / nodes as f64;
            coeffs
                .iter()
                .enumerate()
                .map(|(k, (c, ph))| scale * c * (std::f64::consts::TAU * (k as f64) * y + ph).cos())
                .sum()
        })
        .collect()
}

/// Largest `|inverse(forward(x)) - x| / R0` over random points and displacements.
pub fn geometry_round_trip(geometry: &GeometryConfig, seed: u64, samples: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let per_shape = 100;
    let mut done = 0;
    while done < samples {
        let w = random_displacement(&mut rng, 64, 0.3 * geometry.radius);
        let disp = Displacement::new(&w);
        for _ in 0..per_shape.min(samples - done) {
            let r = rng.random_range(0.05..1.9) * geometry.radius;
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            let x = [r * a.cos(), r * a.sin()];
            let err = match geometry
                .flow_map(x, &disp)
                .and_then(|z| geometry.inverse_flow_map(z, &disp))
            {
                Ok(back) => norm([back[0] - x[0], back[1] - x[1]]) / geometry.radius,
                Err(_) => f64::INFINITY,
            };
            worst = worst.max(err);
            done += 1;
        }
    }
    worst
}

/// Relative drift of the field total after random upwind transport steps.
pub fn transport_conservation(seed: u64, steps: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = Grid::new(32, 1.0);
    let c = grid.cells();
    let ux: Vec<f64> = (0..c).map(|_| rng.random_range(-1.0..1.0)).collect();
    let uy: Vec<f64> = (0..c).map(|_| rng.random_range(-1.0..1.0)).collect();
    let faces = FaceVelocities::from_cells(&grid, &ux, &uy);
    let tau = 0.9 / faces.max_outflow_rate();
    let mut field: Vec<f64> = (0..c).map(|_| rng.random_range(0.0..2.0)).collect();
    let total0: f64 = field.iter().sum();
    for _ in 0..steps {
        field = faces.transport(&field, tau).expect("Courant number below one");
        if field.iter().any(|&x| x < 0.0) {
            return f64::INFINITY;
        }
    }
    rel(field.iter().sum(), total0)
}

/// Runs every property; independent checks run in parallel.
pub fn run_suite(seed: u64) -> Vec<PropertyResult> {
    let eos = EosParams::default();
    let geometry = GeometryConfig::default();
    let checks: Vec<(&'static str, f64, Box<dyn Fn() -> f64 + Send + Sync>)> = vec![
        ("gibbs relation", 1e-6, Box::new(move || gibbs_defect(&eos, 50))),
        (
            "stress positivity",
            0.0,
            Box::new(move || -stress_positivity(&eos, seed, 100_000).min(0.0)),
        ),
        (
            "geometry round trip",
            1e-10,
            Box::new(move || geometry_round_trip(&geometry, seed, 10_000)),
        ),
        (
            "transport conservation",
            1e-12,
            Box::new(move || transport_conservation(seed, 200)),
        ),
    ];
    checks
        .par_iter()
        .map(|(name, tol, f)| {
            let worst = f();
            PropertyResult {
                name,
                passed: worst <= *tol,
                worst,
                tolerance: *tol,
            }
        })
        .collect()
}
