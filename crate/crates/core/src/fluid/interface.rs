//! Deformed interface markers, the cosine-hat transfer kernel, bilinear
//! sampling and the coupling quantities handed to the shell.

use std::f64::consts::PI;

use crate::constitutive::{stress_with, EosParams};
use crate::geometry::{CoefficientFields, Displacement, GeometryConfig, Grid, InterfaceMarkers};
use crate::{Error, Result, Vec2};

use super::{temperatures, velocity_gradient, FluidState};

/// Normalized kernel weights of one marker: `(cell, weight)` summing to one.
pub type Stencil = Vec<(usize, f64)>;

/// One-dimensional cosine hat of half-width `a` (in cells).
#[inline]
pub fn cosine_hat(r: f64, a: f64) -> f64 {
    if r.abs() >= a {
        0.0
    } else {
        (1.0 + (PI * r / a).cos()) / (2.0 * a)
    }
}

/// Tensor-product kernel weights around `x`, normalized to sum to one.
pub fn kernel_stencil(grid: &Grid, marker: usize, x: Vec2, halfwidth: f64) -> Result<Stencil> {
    let out = || Error::MarkerOutOfGrid {
        marker,
        x: x[0],
        y: x[1],
    };
    // continuous cell coordinates: cell centre i sits at s = i
    let sx = (x[0] + grid.halfwidth) / grid.h - 0.5;
    let sy = (x[1] + grid.halfwidth) / grid.h - 0.5;
    let reach = halfwidth.ceil() as i64;
    let (ci, cj) = (sx.round() as i64, sy.round() as i64);
    let n = grid.n as i64;
    if ci - reach < 0 || cj - reach < 0 || ci + reach >= n || cj + reach >= n {
        return Err(out());
    }
    let mut stencil = Vec::with_capacity(((2 * reach + 1) * (2 * reach + 1)) as usize);
    let mut total = 0.0;
    for j in cj - reach..=cj + reach {
        let wy = cosine_hat(j as f64 - sy, halfwidth);
        if wy == 0.0 {
            continue;
        }
        for i in ci - reach..=ci + reach {
            let wx = cosine_hat(i as f64 - sx, halfwidth);
            if wx == 0.0 {
                continue;
            }
            let w = wx * wy;
            total += w;
            stencil.push((grid.index(i as usize, j as usize), w));
        }
    }
    if !(total > 0.0) {
        return Err(out());
    }
    for (_, w) in &mut stencil {
        *w /= total;
    }
    Ok(stencil)
}

/// Bilinear interpolation of a cell-centred field at `x`.
pub fn bilinear(grid: &Grid, field: &[f64], x: Vec2) -> Option<f64> {
    let sx = (x[0] + grid.halfwidth) / grid.h - 0.5;
    let sy = (x[1] + grid.halfwidth) / grid.h - 0.5;
    let (i0, j0) = (sx.floor(), sy.floor());
    let n = grid.n as f64;
    if i0 < 0.0 || j0 < 0.0 || i0 + 1.0 >= n || j0 + 1.0 >= n {
        return None;
    }
    let (tx, ty) = (sx - i0, sy - j0);
    let (i, j) = (i0 as usize, j0 as usize);
    let f = |a: usize, b: usize| field[grid.index(a, b)];
    Some(
        (1.0 - tx) * (1.0 - ty) * f(i, j)
            + tx * (1.0 - ty) * f(i + 1, j)
            + (1.0 - tx) * ty * f(i, j + 1)
            + tx * ty * f(i + 1, j + 1),
    )
}

/// Markers on the deformed boundary for one shell snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkerSet {
    /// Deformed positions.
    pub points: Vec<Vec2>,
    /// Reference normals; the kinematic target is `target_j * normals_j`.
    pub normals: Vec<Vec2>,
    /// Outer normals of the deformed domain.
    pub deformed_normals: Vec<Vec2>,
    /// Surface elements at the markers.
    pub sigma: Vec<f64>,
    /// Physical arclength per marker.
    pub weights: Vec<f64>,
    /// Shell normal velocity at the markers.
    pub target: Vec<f64>,
    pub stencils: Vec<Stencil>,
}

impl MarkerSet {
    /// Places one marker per shell node at the image of the reference point.
    pub fn build(
        geometry: &GeometryConfig,
        grid: &Grid,
        reference: &InterfaceMarkers,
        w: &[f64],
        target: &[f64],
        halfwidth: f64,
    ) -> Result<Self> {
        assert_eq!(reference.len(), w.len(), "one marker per shell node");
        assert_eq!(target.len(), w.len());
        let disp = Displacement::new(w);
        let m = reference.len();
        let mut set = MarkerSet {
            points: Vec::with_capacity(m),
            normals: reference.normals.clone(),
            deformed_normals: Vec::with_capacity(m),
            sigma: Vec::with_capacity(m),
            weights: Vec::with_capacity(m),
            target: target.to_vec(),
            stencils: Vec::with_capacity(m),
        };
        for j in 0..m {
            let y = reference.params[j];
            let x = geometry.flow_map(reference.points[j], &disp)?;
            let sigma = geometry.jacobian_sigma(y, &disp)?;
            set.points.push(x);
            set.deformed_normals.push(geometry.deformed_normal(y, &disp)?);
            set.sigma.push(sigma);
            set.weights.push(reference.weight * sigma);
            set.stencils.push(kernel_stencil(grid, j, x, halfwidth)?);
        }
        Ok(set)
    }

    /// Markers with no stencil: no coupling.
    pub fn empty() -> Self {
        Self {
            points: vec![],
            normals: vec![],
            deformed_normals: vec![],
            sigma: vec![],
            weights: vec![],
            target: vec![],
            stencils: vec![],
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Kernel-weighted average of `field` at each marker.
    pub fn sample(&self, field: &[f64]) -> Vec<f64> {
        self.stencils
            .iter()
            .map(|s| s.iter().map(|&(c, w)| w * field[c]).sum())
            .collect()
    }

    /// Force density on the grid from per-marker forces per unit length.
    pub fn spread(&self, grid: &Grid, forces: &[Vec2]) -> (Vec<f64>, Vec<f64>) {
        let mut fx = vec![0.0; grid.cells()];
        let mut fy = vec![0.0; grid.cells()];
        let inv_area = 1.0 / grid.cell_area();
        for (j, s) in self.stencils.iter().enumerate() {
            let scale = self.weights[j] * inv_area;
            for &(c, w) in s {
                fx[c] += forces[j][0] * scale * w;
                fy[c] += forces[j][1] * scale * w;
            }
        }
        (fx, fy)
    }

    /// `sum_j l_j |U_j - W_j n_j|^2` with kernel-sampled velocity.
    pub fn mismatch(&self, ux: &[f64], uy: &[f64]) -> f64 {
        let sx = self.sample(ux);
        let sy = self.sample(uy);
        (0..self.len())
            .map(|j| {
                let dx = sx[j] - self.target[j] * self.normals[j][0];
                let dy = sy[j] - self.target[j] * self.normals[j][1];
                self.weights[j] * (dx * dx + dy * dy)
            })
            .sum()
    }
}

/// Penalty force density `-(delta/dt)(U_j - W_j n_j)` spread to the grid.
pub fn spread_penalty(
    grid: &Grid,
    markers: &MarkerSet,
    penalty: f64,
    mismatch: &[Vec2],
) -> (Vec<f64>, Vec<f64>) {
    let forces: Vec<Vec2> = mismatch
        .iter()
        .map(|d| [-penalty * d[0], -penalty * d[1]])
        .collect();
    markers.spread(grid, &forces)
}

/// Per-marker fluid data for the shell and the diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceCoupling {
    pub velocity: Vec<Vec2>,
    /// Traction `-(P I - S) n_w`.
    pub traction: Vec<Vec2>,
    /// Entropy flux `kappa grad(theta) . n_w / theta`.
    pub entropy_flux: Vec<f64>,
}

impl InterfaceCoupling {
    /// Normal force `sigma_w F.n` per node.
    pub fn normal_force(&self, markers: &MarkerSet) -> Vec<f64> {
        (0..markers.len())
            .map(|j| {
                let n = markers.normals[j];
                markers.sigma[j] * (self.traction[j][0] * n[0] + self.traction[j][1] * n[1])
            })
            .collect()
    }

    pub fn weighted_entropy_flux(&self, markers: &MarkerSet) -> Vec<f64> {
        (0..markers.len())
            .map(|j| markers.sigma[j] * self.entropy_flux[j])
            .collect()
    }
}

/// Bilinear samples of velocity, traction and entropy flux at the markers.
pub fn interface_sample(
    state: &FluidState,
    markers: &MarkerSet,
    eos: &EosParams,
    coeffs: &CoefficientFields,
    eps_v: f64,
) -> Result<InterfaceCoupling> {
    let grid = state.grid;
    let pinned = super::pinned_mask(&grid, &state.rho, eps_v);
    let (ux, uy) = super::cell_velocities(state, eps_v, &pinned);
    let theta = temperatures(state, eos, &coeffs.f);
    let grad = velocity_gradient(&grid, &ux, &uy);
    let (tx, ty) = super::central_gradient(&grid, &theta);
    let cells = grid.cells();
    let mut sxx = vec![0.0; cells];
    let mut sxy = vec![0.0; cells];
    let mut syx = vec![0.0; cells];
    let mut syy = vec![0.0; cells];
    let mut ptot = vec![0.0; cells];
    let mut qx = vec![0.0; cells];
    let mut qy = vec![0.0; cells];
    for k in 0..cells {
        let (mu, eta, kappa) = eos.transport_coeffs(theta[k], coeffs.g[k], coeffs.h[k]);
        let s = stress_with(mu, eta, &grad[k]);
        sxx[k] = s[0][0];
        sxy[k] = s[0][1];
        syx[k] = s[1][0];
        syy[k] = s[1][1];
        ptot[k] = eos.total_pressure(state.rho[k], state.b[k], theta[k], coeffs.f[k]);
        if theta[k] > 0.0 {
            qx[k] = kappa * tx[k] / theta[k];
            qy[k] = kappa * ty[k] / theta[k];
        }
    }
    let mut out = InterfaceCoupling {
        velocity: Vec::with_capacity(markers.len()),
        traction: Vec::with_capacity(markers.len()),
        entropy_flux: Vec::with_capacity(markers.len()),
    };
    for (j, &x) in markers.points.iter().enumerate() {
        let at = |f: &[f64]| {
            bilinear(&grid, f, x).ok_or(Error::MarkerOutOfGrid {
                marker: j,
                x: x[0],
                y: x[1],
            })
        };
        let nw = markers.deformed_normals[j];
        let p = at(&ptot)?;
        let s = [[at(&sxx)?, at(&sxy)?], [at(&syx)?, at(&syy)?]];
        out.velocity.push([at(&ux)?, at(&uy)?]);
        out.traction.push([
            -p * nw[0] + s[0][0] * nw[0] + s[0][1] * nw[1],
            -p * nw[1] + s[1][0] * nw[0] + s[1][1] * nw[1],
        ]);
        out.entropy_flux.push(at(&qx)? * nw[0] + at(&qy)? * nw[1]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (GeometryConfig, Grid, InterfaceMarkers) {
        let g = GeometryConfig::default();
        (g, Grid::new(64, 2.0), InterfaceMarkers::new(&g, 64))
    }

    #[test]
    fn stencil_sums_to_one_and_reproduces_linears() {
        let grid = Grid::new(32, 2.0);
        let x = [0.337, -0.712];
        let s = kernel_stencil(&grid, 0, x, 2.0).unwrap();
        let total: f64 = s.iter().map(|&(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-14);
        assert!(kernel_stencil(&grid, 0, [1.98, 0.0], 2.0).is_err());
    }

    #[test]
    fn bilinear_examples() {
        let grid = Grid::new(40, 2.0);
        let n = grid.n;
        let ones = vec![1.0; grid.cells()];
        assert!((bilinear(&grid, &ones, [0.3, 0.1]).unwrap() - 1.0).abs() < 1e-15);
        let mut lin = vec![0.0; grid.cells()];
        for j in 0..n {
            for i in 0..n {
                lin[grid.index(i, j)] = grid.center(i, j)[0];
            }
        }
        assert!((bilinear(&grid, &lin, [0.5, 0.0]).unwrap() - 0.5).abs() < 1e-14);
        assert!(bilinear(&grid, &lin, [1.99, 0.0]).is_none());
    }

    #[test]
    fn spread_conserves_total_force() {
        let (g, grid, reference) = setup();
        let w = vec![0.0; 64];
        let v = vec![0.0; 64];
        let markers = MarkerSet::build(&g, &grid, &reference, &w, &v, 2.0).unwrap();
        let forces: Vec<Vec2> = (0..64).map(|j| [(j as f64).sin(), (j as f64 * 0.7).cos()]).collect();
        let (fx, fy) = markers.spread(&grid, &forces);
        let area = grid.cell_area();
        let gx: f64 = fx.iter().sum::<f64>() * area;
        let gy: f64 = fy.iter().sum::<f64>() * area;
        let mx: f64 = (0..64).map(|j| forces[j][0] * markers.weights[j]).sum();
        let my: f64 = (0..64).map(|j| forces[j][1] * markers.weights[j]).sum();
        assert!((gx - mx).abs() < 1e-12 && (gy - my).abs() < 1e-12);
    }

    #[test]
    fn penalty_spread_examples() {
        let (g, grid, reference) = setup();
        let w = vec![0.0; 64];
        let markers = MarkerSet::build(&g, &grid, &reference, &w, &w, 2.0).unwrap();
        let zero = vec![[0.0, 0.0]; 64];
        let (fx, fy) = spread_penalty(&grid, &markers, 100.0, &zero);
        assert!(fx.iter().chain(&fy).all(|&v| v == 0.0));

        // one active marker, unit force
        let mut one = zero.clone();
        one[5] = [1.0, 0.0];
        let (fx, _) = markers.spread(&grid, &one);
        let sum: f64 = fx.iter().sum();
        let oracle: f64 = markers.stencils[5].iter().map(|&(_, w)| w).sum::<f64>()
            * markers.weights[5]
            / grid.cell_area();
        assert!((sum - oracle).abs() < 1e-12 * oracle);

        // marker mismatch c n gives impulse -(delta/dt) c n l
        let c = 0.3;
        let mut mm = zero.clone();
        mm[9] = [c * markers.normals[9][0], c * markers.normals[9][1]];
        let pen = 50.0;
        let (fx, fy) = spread_penalty(&grid, &markers, pen, &mm);
        let a = grid.cell_area();
        let ix: f64 = fx.iter().sum::<f64>() * a;
        let iy: f64 = fy.iter().sum::<f64>() * a;
        let l = markers.weights[9];
        assert!((ix + pen * c * markers.normals[9][0] * l).abs() < 1e-12);
        assert!((iy + pen * c * markers.normals[9][1] * l).abs() < 1e-12);

        // antipodal opposite normal forces cancel
        let mut anti = zero;
        anti[0] = markers.normals[0];
        anti[32] = markers.normals[32];
        let (fx, fy) = markers.spread(&grid, &anti);
        assert!(fx.iter().sum::<f64>().abs() < 1e-12);
        assert!(fy.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn marker_weights_sum_to_perimeter() {
        let (g, grid, reference) = setup();
        let w = vec![0.0; 64];
        let m = MarkerSet::build(&g, &grid, &reference, &w, &w, 2.0).unwrap();
        let total: f64 = m.weights.iter().sum();
        assert!((total - g.perimeter()).abs() < 1e-7);
    }

    #[test]
    fn uniform_flow_is_sampled_exactly() {
        let (g, grid, reference) = setup();
        let w = vec![0.0; 64];
        let markers = MarkerSet::build(&g, &grid, &reference, &w, &w, 2.0).unwrap();
        let mut st = FluidState::zeros(grid);
        st.rho.fill(1.0);
        st.mx.fill(1.0);
        // keep the boundary ring away from the markers: it is pinned to zero
        let eos = EosParams::default();
        let coeffs = CoefficientFields::uniform(grid.cells());
        let c = interface_sample(&st, &markers, &eos, &coeffs, 1e-8).unwrap();
        for u in &c.velocity {
            assert!((u[0] - 1.0).abs() < 1e-12 && u[1].abs() < 1e-15);
        }
    }

    #[test]
    fn quiescent_vacuum_has_zero_traction() {
        let (g, grid, reference) = setup();
        let w = vec![0.0; 64];
        let markers = MarkerSet::build(&g, &grid, &reference, &w, &w, 2.0).unwrap();
        let st = FluidState::zeros(grid);
        let eos = EosParams::default();
        let coeffs = CoefficientFields::uniform(grid.cells());
        let c = interface_sample(&st, &markers, &eos, &coeffs, 1e-8).unwrap();
        assert!(c.normal_force(&markers).iter().all(|&f| f == 0.0));
    }
}
