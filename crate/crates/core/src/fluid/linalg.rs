//! Jacobi-preconditioned conjugate gradients for the matrix-free implicit solves.

use crate::{Error, Result};

/// Solves `A x = b` for symmetric positive definite `A`, starting from `x`.
///
/// Entries where `inv_diag` is zero are frozen at zero; `apply` need not
/// produce meaningful output there. Converges when the
/// residual norm drops below `tol * max(|b|, tiny)`.
pub fn pcg(
    which: &'static str,
    apply: impl Fn(&[f64], &mut [f64]),
    inv_diag: &[f64],
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<usize> {
    let n = b.len();
    // vector work only touches the unfrozen entries
    let idx: Vec<usize> = (0..n).filter(|&i| inv_diag[i] != 0.0).collect();
    let dot_on = |a: &[f64], c: &[f64]| idx.iter().map(|&i| a[i] * c[i]).sum::<f64>();
    for i in 0..n {
        if inv_diag[i] == 0.0 {
            x[i] = 0.0;
        }
    }
    let bnorm = dot_on(b, b).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(0);
    }
    let target = tol * bnorm;
    let mut ax = vec![0.0; n];
    apply(x, &mut ax);
    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    for &i in &idx {
        r[i] = b[i] - ax[i];
        z[i] = r[i] * inv_diag[i];
    }
    let mut p = z.clone();
    let mut rz = dot_on(&r, &z);
    let mut ap = ax;
    for it in 0..max_iter {
        let rnorm = dot_on(&r, &r).sqrt();
        if rnorm <= target {
            return Ok(it);
        }
        apply(&p, &mut ap);
        let pap = dot_on(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::SolverStalled {
                which,
                iterations: it,
                residual: rnorm / bnorm,
            });
        }
        let alpha = rz / pap;
        let mut rz_new = 0.0;
        for &i in &idx {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
            z[i] = r[i] * inv_diag[i];
            rz_new += r[i] * z[i];
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for &i in &idx {
            p[i] = z[i] + beta * p[i];
        }
    }
    let rnorm = dot_on(&r, &r).sqrt();
    if rnorm <= target {
        return Ok(max_iter);
    }
    Err(Error::SolverStalled {
        which,
        iterations: max_iter,
        residual: rnorm / bnorm,
    })
}
