//! Reference circle, cutoff, flow map and the extension fields on the fixed box.
//!
//! The reference boundary is the circle of radius `R0` parameterized over the
//! unit torus by `y -> R0 (cos 2 pi y, sin 2 pi y)`. The shell displaces it in
//! the outward normal direction, and the flow map extends that displacement
//! into a tubular neighbourhood through a cutoff in the signed distance.

use std::f64::consts::TAU;

use crate::{Error, Result, Vec2};

/// Breakpoints `m'' < m' < 0 < M' < M''` of the cutoff in the signed distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffBreakpoints {
    /// `m''`: the cutoff vanishes for distances at or below this value.
    pub inner_support: f64,
    /// `m'`: start of the plateau on the inside.
    pub inner_plateau: f64,
    /// `M'`: end of the plateau on the outside.
    pub outer_plateau: f64,
    /// `M''`: the cutoff vanishes for distances at or above this value.
    pub outer_support: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryConfig {
    pub radius: f64,
    pub cutoff: CutoffBreakpoints,
    /// Lower admissible displacement `alpha`.
    pub alpha_bound: f64,
    /// Upper admissible displacement `beta`.
    pub beta_bound: f64,
    /// Half-width `M0` of the fixed square box.
    pub box_halfwidth: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            radius: 1.0,
            cutoff: CutoffBreakpoints {
                inner_support: -0.85,
                inner_plateau: -0.25,
                outer_plateau: 0.25,
                outer_support: 0.85,
            },
            alpha_bound: -0.9,
            beta_bound: 0.9,
            box_halfwidth: 2.0,
        }
    }
}

impl GeometryConfig {
    /// Checks the ordering of the breakpoints and that the box contains every
    /// admissible deformed domain plus `kernel_reach`.
    pub fn validate(&self, kernel_reach: f64) -> Result<()> {
        let c = &self.cutoff;
        if !(self.radius > 0.0) {
            return Err(Error::Invalid("geometry.radius must be positive".into()));
        }
        if !(c.inner_support < c.inner_plateau
            && c.inner_plateau < 0.0
            && 0.0 < c.outer_plateau
            && c.outer_plateau < c.outer_support)
        {
            return Err(Error::Invalid(
                "geometry.cutoff must satisfy m2 < m1 < 0 < M1 < M2".into(),
            ));
        }
        if !(self.alpha_bound < c.inner_support && c.outer_support < self.beta_bound) {
            return Err(Error::Invalid(
                "geometry.bounds must satisfy alpha < m2 and M2 < beta".into(),
            ));
        }
        if !(self.alpha_bound > -self.radius) {
            return Err(Error::Invalid(
                "geometry.bounds.alpha must exceed -radius (tubular injectivity)".into(),
            ));
        }
        if self.box_halfwidth < self.radius + self.beta_bound + kernel_reach {
            return Err(Error::Invalid(format!(
                "geometry.box_halfwidth {} < radius + beta + kernel reach = {}",
                self.box_halfwidth,
                self.radius + self.beta_bound + kernel_reach
            )));
        }
        Ok(())
    }

    /// Signed distance to the reference circle, negative inside.
    pub fn signed_distance(&self, x: Vec2) -> f64 {
        norm(x) - self.radius
    }

    /// Closest point on the reference circle.
    pub fn project(&self, x: Vec2) -> Result<Vec2> {
        let r = norm(x);
        if r == 0.0 {
            return Err(Error::DegeneratePoint);
        }
        Ok([self.radius * x[0] / r, self.radius * x[1] / r])
    }

    /// Torus parameter of the projection, `phi^{-1}(pi(x))`, in `[0, 1)`.
    pub fn parameter_of(&self, x: Vec2) -> f64 {
        let y = x[1].atan2(x[0]) / TAU;
        if y < 0.0 {
            y + 1.0
        } else {
            y
        }
    }

    pub fn boundary_point(&self, y: f64) -> Vec2 {
        let a = TAU * y;
        [self.radius * a.cos(), self.radius * a.sin()]
    }

    pub fn normal(&self, y: f64) -> Vec2 {
        let a = TAU * y;
        [a.cos(), a.sin()]
    }

    /// Length of the reference boundary.
    pub fn perimeter(&self) -> f64 {
        TAU * self.radius
    }

    /// C1 cutoff: Hermite ramps on `(m'', m')` and `(M', M'')`, plateau between.
    pub fn cutoff(&self, d: f64) -> f64 {
        let c = &self.cutoff;
        if d <= c.inner_support || d >= c.outer_support {
            0.0
        } else if d < c.inner_plateau {
            smoothstep((d - c.inner_support) / (c.inner_plateau - c.inner_support))
        } else if d <= c.outer_plateau {
            1.0
        } else {
            smoothstep((c.outer_support - d) / (c.outer_support - c.outer_plateau))
        }
    }

    pub fn cutoff_slope(&self, d: f64) -> f64 {
        let c = &self.cutoff;
        if d <= c.inner_support || d >= c.outer_support {
            0.0
        } else if d < c.inner_plateau {
            let wdt = c.inner_plateau - c.inner_support;
            smoothstep_slope((d - c.inner_support) / wdt) / wdt
        } else if d <= c.outer_plateau {
            0.0
        } else {
            let wdt = c.outer_support - c.outer_plateau;
            -smoothstep_slope((c.outer_support - d) / wdt) / wdt
        }
    }

    /// Largest |w| for which the radial map stays monotone on the ramps.
    pub fn injectivity_margin(&self, w: f64) -> f64 {
        let c = &self.cutoff;
        // max slope of the Hermite ramp is 1.5 / width
        let slope = if w >= 0.0 {
            1.5 / (c.outer_support - c.outer_plateau)
        } else {
            1.5 / (c.inner_plateau - c.inner_support)
        };
        1.0 - w.abs() * slope
    }

    /// Extended flow map `x + f(d(x)) w(y(x)) n(y(x))`.
    pub fn flow_map(&self, x: Vec2, w: &Displacement<'_>) -> Result<Vec2> {
        let fc = self.cutoff(self.signed_distance(x));
        if fc == 0.0 {
            return Ok(x);
        }
        let p = self.project(x)?;
        let y = self.parameter_of(x);
        let shift = fc * w.at(y);
        Ok([
            x[0] + shift * p[0] / self.radius,
            x[1] + shift * p[1] / self.radius,
        ])
    }

    /// Inverse of [`Self::flow_map`] by Newton iteration along the ray through `z`.
    pub fn inverse_flow_map(&self, z: Vec2, w: &Displacement<'_>) -> Result<Vec2> {
        const MAX_ITER: usize = 50;
        let rho = norm(z);
        if rho == 0.0 {
            // cutoff vanishes at the origin, so it is a fixed point
            return Ok(z);
        }
        let amp = w.at(self.parameter_of(z));
        if amp == 0.0 {
            return Ok(z);
        }
        let tol = 1e-13 * self.radius;
        let mut r = (rho - self.cutoff(rho - self.radius) * amp).max(0.0);
        for _ in 0..MAX_ITER {
            let g = r + self.cutoff(r - self.radius) * amp - rho;
            if g.abs() <= tol {
                let s = r / rho;
                return Ok([z[0] * s, z[1] * s]);
            }
            let dg = 1.0 + self.cutoff_slope(r - self.radius) * amp;
            if dg <= 0.0 {
                return Err(Error::Degenerate(format!(
                    "flow map loses monotonicity along the ray at radius {r:.6}"
                )));
            }
            r -= g / dg;
            if r < 0.0 {
                r = 0.0;
            }
        }
        Err(Error::NoConvergence {
            iterations: MAX_ITER,
            x: z[0],
            y: z[1],
        })
    }

    /// Centered finite-difference Jacobian of the flow map, step `1e-6 R0`.
    pub fn flow_jacobian(&self, x: Vec2, w: &Displacement<'_>) -> Result<[[f64; 2]; 2]> {
        let hg = 1e-6 * self.radius;
        let mut jac = [[0.0; 2]; 2];
        for k in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += hg;
            xm[k] -= hg;
            let fp = self.flow_map(xp, w)?;
            let fm = self.flow_map(xm, w)?;
            for i in 0..2 {
                jac[i][k] = (fp[i] - fm[i]) / (2.0 * hg);
            }
        }
        Ok(jac)
    }

    /// Surface element `sigma_w = det J |J^{-T} n|` at the boundary point `phi(y)`.
    pub fn jacobian_sigma(&self, y: f64, w: &Displacement<'_>) -> Result<f64> {
        let (det, m) = self.nanson(y, w)?;
        let sigma = det * norm(m);
        if !(sigma > 0.0) {
            return Err(Error::Degenerate(format!(
                "surface element {sigma:e} at y = {y:.4}"
            )));
        }
        Ok(sigma)
    }

    /// Outer unit normal of the deformed domain at the image of `phi(y)`.
    pub fn deformed_normal(&self, y: f64, w: &Displacement<'_>) -> Result<Vec2> {
        let (_, m) = self.nanson(y, w)?;
        let len = norm(m);
        Ok([m[0] / len, m[1] / len])
    }

    fn nanson(&self, y: f64, w: &Displacement<'_>) -> Result<(f64, Vec2)> {
        let jac = self.flow_jacobian(self.boundary_point(y), w)?;
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if !(det > 0.0) {
            return Err(Error::Degenerate(format!(
                "flow-map Jacobian determinant {det:e} at y = {y:.4}"
            )));
        }
        let n = self.normal(y);
        // J^{-T} n
        let m = [
            (jac[1][1] * n[0] - jac[1][0] * n[1]) / det,
            (-jac[0][1] * n[0] + jac[0][0] * n[1]) / det,
        ];
        Ok((det, m))
    }

    /// Membership in the deformed domain via the inverse map.
    pub fn inside(&self, x: Vec2, w: &Displacement<'_>) -> Result<bool> {
        let y = self.inverse_flow_map(x, w)?;
        Ok(norm(y) < self.radius)
    }

    /// Radial excess of `x` beyond the deformed boundary along its ray.
    ///
    /// Negative exactly when `x` is inside, provided the radial map is monotone
    /// (checked by [`Self::injectivity_margin`]).
    pub fn radial_excess(&self, x: Vec2, w: &Displacement<'_>) -> f64 {
        norm(x) - (self.radius + w.at(self.parameter_of(x)))
    }

    /// Extension fields `(g, h, f)` on the grid for the current displacement.
    pub fn coefficient_fields(
        &self,
        grid: &Grid,
        w: &Displacement<'_>,
        omega: f64,
        zeta: f64,
        lambda: f64,
    ) -> CoefficientFields {
        let band = 3.0 * grid.h;
        let n = grid.n;
        let mut g = vec![0.0; n * n];
        let mut h = vec![0.0; n * n];
        let mut f = vec![0.0; n * n];
        let mut inside = vec![false; n * n];
        for j in 0..n {
            for i in 0..n {
                let k = grid.index(i, j);
                let e = self.radial_excess(grid.center(i, j), w);
                if e < 0.0 {
                    g[k] = 1.0;
                    h[k] = 1.0;
                    f[k] = 1.0;
                    inside[k] = true;
                } else {
                    g[k] = if e < band {
                        1.0 - (1.0 - omega) * e / band
                    } else {
                        omega
                    };
                    h[k] = zeta;
                    f[k] = lambda;
                }
            }
        }
        CoefficientFields { g, h, f, inside }
    }
}

/// Extension multipliers for viscosity (`g`), conductivity (`h`) and the
/// radiation constant (`f`), plus the interior mask they were built from.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientFields {
    pub g: Vec<f64>,
    pub h: Vec<f64>,
    pub f: Vec<f64>,
    pub inside: Vec<bool>,
}

impl CoefficientFields {
    /// Fields with no extension penalty.
    pub fn uniform(cells: usize) -> Self {
        Self {
            g: vec![1.0; cells],
            h: vec![1.0; cells],
            f: vec![1.0; cells],
            inside: vec![true; cells],
        }
    }
}

/// Uniform cell-centred grid on the box `[-M0, M0]^2`, row-major (`j * n + i`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub n: usize,
    pub halfwidth: f64,
    pub h: f64,
}

impl Grid {
    pub fn new(n: usize, halfwidth: f64) -> Self {
        Self {
            n,
            halfwidth,
            h: 2.0 * halfwidth / n as f64,
        }
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    #[inline]
    pub fn center(&self, i: usize, j: usize) -> Vec2 {
        [
            -self.halfwidth + (i as f64 + 0.5) * self.h,
            -self.halfwidth + (j as f64 + 0.5) * self.h,
        ]
    }

    pub fn cells(&self) -> usize {
        self.n * self.n
    }

    pub fn cell_area(&self) -> f64 {
        self.h * self.h
    }

    /// Cells in the outermost ring, where velocity is held at zero.
    #[inline]
    pub fn on_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i + 1 == self.n || j + 1 == self.n
    }
}

/// Periodic displacement samples on the torus with C1 Catmull-Rom interpolation.
#[derive(Debug, Clone, Copy)]
pub struct Displacement<'a> {
    samples: &'a [f64],
}

impl<'a> Displacement<'a> {
    pub fn new(samples: &'a [f64]) -> Self {
        assert!(!samples.is_empty(), "displacement needs at least one sample");
        Self { samples }
    }

    pub fn samples(&self) -> &'a [f64] {
        self.samples
    }

    fn stencil(&self, y: f64) -> ([f64; 4], f64) {
        let n = self.samples.len();
        let s = y.rem_euclid(1.0) * n as f64;
        let i = s.floor();
        let t = s - i;
        let i = i as isize;
        let at = |k: isize| self.samples[k.rem_euclid(n as isize) as usize];
        ([at(i - 1), at(i), at(i + 1), at(i + 2)], t)
    }

    pub fn at(&self, y: f64) -> f64 {
        let ([p0, p1, p2, p3], t) = self.stencil(y);
        0.5 * (2.0 * p1
            + (p2 - p0) * t
            + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t * t
            + (3.0 * p1 - p0 - 3.0 * p2 + p3) * t * t * t)
    }

    /// Derivative with respect to the torus parameter `y`.
    pub fn derivative(&self, y: f64) -> f64 {
        let ([p0, p1, p2, p3], t) = self.stencil(y);
        let n = self.samples.len() as f64;
        0.5 * n
            * ((p2 - p0)
                + 2.0 * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t
                + 3.0 * (3.0 * p1 - p0 - 3.0 * p2 + p3) * t * t)
    }
}

/// Uniform markers on the reference boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceMarkers {
    pub params: Vec<f64>,
    pub points: Vec<Vec2>,
    pub normals: Vec<Vec2>,
    /// Reference arclength per marker; sums to `2 pi R0`.
    pub weight: f64,
}

impl InterfaceMarkers {
    pub fn new(geometry: &GeometryConfig, count: usize) -> Self {
        let params: Vec<f64> = (0..count).map(|j| j as f64 / count as f64).collect();
        let points = params.iter().map(|&y| geometry.boundary_point(y)).collect();
        let normals = params.iter().map(|&y| geometry.normal(y)).collect();
        Self {
            params,
            points,
            normals,
            weight: geometry.perimeter() / count as f64,
        }
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }
}

#[inline]
pub fn norm(x: Vec2) -> f64 {
    x[0].hypot(x[1])
}

#[inline]
fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

#[inline]
fn smoothstep_slope(t: f64) -> f64 {
    6.0 * t * (1.0 - t)
}

/// Arclength ratio of the deformed circle for a displacement `w` with
/// derivative `dw`; the closed form the finite-difference `sigma_w` should hit.
pub fn circle_sigma(radius: f64, w: f64, dw: f64) -> f64 {
    (dw * dw + (TAU * (radius + w)).powi(2)).sqrt() / (TAU * radius)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geo() -> GeometryConfig {
        GeometryConfig::default()
    }

    #[test]
    fn distance_and_projection_on_unit_circle() {
        let g = geo();
        assert_eq!(g.signed_distance([2.0, 0.0]), 1.0);
        assert_eq!(g.signed_distance([0.0, 0.0]), -1.0);
        assert!(g.signed_distance([0.6, 0.8]).abs() < 1e-15);
        assert_eq!(g.project([2.0, 0.0]).unwrap(), [1.0, 0.0]);
        let p = g.project([0.3, 0.4]).unwrap();
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
        assert!(matches!(g.project([0.0, 0.0]), Err(Error::DegeneratePoint)));
    }

    #[test]
    fn cutoff_profile() {
        let g = geo();
        let c = g.cutoff;
        assert_eq!(g.cutoff(0.5 * (c.inner_plateau + c.outer_plateau)), 1.0);
        assert_eq!(g.cutoff(0.0), 1.0);
        assert_eq!(g.cutoff(c.inner_support), 0.0);
        assert_eq!(g.cutoff(c.inner_support - 1.0), 0.0);
        assert_eq!(g.cutoff(c.outer_support + 0.1), 0.0);
        let mid = 0.5 * (c.inner_support + c.inner_plateau);
        assert!((g.cutoff(mid) - 0.5).abs() < 1e-15);
        let mid = 0.5 * (c.outer_support + c.outer_plateau);
        assert!((g.cutoff(mid) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn cutoff_is_monotone_and_c1() {
        let g = geo();
        let mut prev = 0.0;
        let mut d = -1.0;
        while d < 0.0 {
            let v = g.cutoff(d);
            assert!(v >= prev - 1e-15 && (0.0..=1.0).contains(&v));
            prev = v;
            let fd = (g.cutoff(d + 1e-7) - g.cutoff(d - 1e-7)) / 2e-7;
            assert!((fd - g.cutoff_slope(d)).abs() < 1e-5, "slope mismatch at {d}");
            d += 1e-3;
        }
        while d < 1.0 {
            let v = g.cutoff(d);
            assert!(v <= prev + 1e-15);
            prev = v;
            d += 1e-3;
        }
    }

    #[test]
    fn flow_map_examples() {
        let g = geo();
        let zero = vec![0.0; 64];
        let w0 = Displacement::new(&zero);
        for x in [[0.3, -0.2], [1.0, 0.0], [1.7, 0.4]] {
            assert_eq!(g.flow_map(x, &w0).unwrap(), x);
        }
        let c = vec![0.2; 64];
        let wc = Displacement::new(&c);
        let x = g.boundary_point(0.1);
        let y = g.flow_map(x, &wc).unwrap();
        assert!((y[0] - x[0] * 1.2).abs() < 1e-14 && (y[1] - x[1] * 1.2).abs() < 1e-14);
        // outside the cutoff support the map is the identity
        assert_eq!(g.flow_map([0.1, 0.05], &wc).unwrap(), [0.1, 0.05]);
        assert_eq!(g.flow_map([1.9, 0.0], &wc).unwrap(), [1.9, 0.0]);
    }

    #[test]
    fn inverse_examples() {
        let g = geo();
        let c = vec![0.2; 64];
        let wc = Displacement::new(&c);
        let y = g.inverse_flow_map([1.2, 0.0], &wc).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-12 && y[1].abs() < 1e-15);
        let zero = vec![0.0; 64];
        let w0 = Displacement::new(&zero);
        assert_eq!(g.inverse_flow_map([0.7, 0.1], &w0).unwrap(), [0.7, 0.1]);
        assert_eq!(g.inverse_flow_map([0.0, 0.0], &wc).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn sigma_examples() {
        let g = geo();
        let zero = vec![0.0; 64];
        let s = g.jacobian_sigma(0.3, &Displacement::new(&zero)).unwrap();
        assert!((s - 1.0).abs() < 1e-8);
        let c = vec![0.2; 64];
        let s = g.jacobian_sigma(0.3, &Displacement::new(&c)).unwrap();
        assert!((s - 1.2).abs() < 1e-8);
        // non-constant displacement against the arclength ratio
        let n = 256;
        let w: Vec<f64> = (0..n)
            .map(|j| 0.1 * (TAU * 2.0 * j as f64 / n as f64).sin())
            .collect();
        let disp = Displacement::new(&w);
        for y in [0.0, 0.1, 0.37] {
            let s = g.jacobian_sigma(y, &disp).unwrap();
            let oracle = circle_sigma(1.0, disp.at(y), disp.derivative(y));
            assert!((s - oracle).abs() < 1e-6, "{s} vs {oracle}");
        }
    }

    #[test]
    fn sigma_flags_collapse() {
        let g = geo();
        let w = vec![-1.0 + 1e-9; 32];
        match g.jacobian_sigma(0.2, &Displacement::new(&w)) {
            Ok(s) => assert!(s < 1e-6),
            Err(e) => assert!(e.is_degeneracy()),
        }
        let w = vec![-1.2; 32];
        assert!(g.jacobian_sigma(0.2, &Displacement::new(&w)).is_err());
    }

    #[test]
    fn inside_examples() {
        let g = geo();
        let zero = vec![0.0; 16];
        let w0 = Displacement::new(&zero);
        assert!(g.inside([0.0, 0.0], &w0).unwrap());
        assert!(!g.inside([1.1, 0.0], &w0).unwrap());
        let c = vec![0.2; 16];
        assert!(g.inside([1.1, 0.0], &Displacement::new(&c)).unwrap());
    }

    #[test]
    fn coefficient_field_examples() {
        let g = geo();
        let grid = Grid::new(32, 2.0);
        let zero = vec![0.0; 16];
        let w0 = Displacement::new(&zero);
        let cf = g.coefficient_fields(&grid, &w0, 0.04, 0.04, 6.4e-5);
        let centre = grid.index(16, 16);
        assert_eq!((cf.g[centre], cf.h[centre], cf.f[centre]), (1.0, 1.0, 1.0));
        let corner = grid.index(0, 0);
        assert_eq!((cf.g[corner], cf.h[corner], cf.f[corner]), (0.04, 0.04, 6.4e-5));
        assert!(cf.g.iter().all(|&v| (0.04..=1.0).contains(&v)));
        let ones = g.coefficient_fields(&grid, &w0, 1.0, 1.0, 1.0);
        assert!(ones.g.iter().chain(&ones.h).chain(&ones.f).all(|&v| v == 1.0));
    }

    #[test]
    fn catmull_rom_reproduces_linear_and_periodic() {
        let n = 40;
        let w: Vec<f64> = (0..n).map(|j| (TAU * j as f64 / n as f64).cos()).collect();
        let d = Displacement::new(&w);
        for k in 0..n {
            let y = k as f64 / n as f64;
            assert!((d.at(y) - w[k]).abs() < 1e-14);
        }
        assert!((d.at(1.0 + 0.013) - d.at(0.013)).abs() < 1e-14);
        assert!((d.at(0.013) - (TAU * 0.013).cos()).abs() < 1e-4);
    }

    #[test]
    fn config_validation() {
        assert!(geo().validate(0.0625).is_ok());
        let mut bad = geo();
        bad.box_halfwidth = 1.5;
        assert!(bad.validate(0.0625).is_err());
        let mut bad = geo();
        bad.cutoff.inner_plateau = 0.1;
        assert!(bad.validate(0.0).is_err());
    }
}
