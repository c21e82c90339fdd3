//! Thermodynamic closure: pressure, energy, entropy, transport coefficients,
//! viscous stress, Helmholtz function and temperature recovery.
//!
//! Every function taking `f_lambda` scales the radiation constant by the local
//! extension multiplier, so `a` becomes `a * f_lambda`.

use crate::{Error, Result, Tensor2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EosParams {
    pub gamma: f64,
    /// Radiation constant.
    pub a: f64,
    /// Artificial-pressure exponent.
    pub beta: f64,
    /// Artificial-pressure weight; shared with the penalty weight of the splitting.
    pub delta: f64,
    pub mu_bar: f64,
    pub eta_bar: f64,
    pub kappa_bar: f64,
    /// Temperature-sink weight.
    pub xi: f64,
    pub rho_ref: f64,
    pub theta_ref: f64,
}

impl Default for EosParams {
    fn default() -> Self {
        Self {
            gamma: 2.0,
            a: 1.0,
            beta: 4.0,
            delta: 0.01,
            mu_bar: 1.0,
            eta_bar: 1.0,
            kappa_bar: 1.0,
            xi: 0.1,
            rho_ref: 1.0,
            theta_ref: 1.0,
        }
    }
}

impl EosParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Invalid(msg.to_string()));
        if !(self.gamma > 5.0 / 3.0) {
            return bad("eos.gamma must satisfy gamma > 5/3");
        }
        if !(self.beta >= self.gamma.max(4.0)) {
            return bad("eos.beta must satisfy beta >= max{4, gamma}");
        }
        if !(self.a >= 0.0) {
            return bad("eos.a must be nonnegative");
        }
        if !(self.delta >= 0.0 && self.delta < 1.0) {
            return bad("delta must satisfy 0 <= delta < 1");
        }
        if !(self.mu_bar > 0.0) {
            return bad("eos.mu_bar must be positive");
        }
        if !(self.eta_bar >= 0.0) {
            return bad("eos.eta_bar must be nonnegative");
        }
        if !(self.kappa_bar > 0.0) {
            return bad("eos.kappa_bar must be positive");
        }
        if !(self.xi >= 0.0) {
            return bad("xi must be nonnegative");
        }
        if !(self.theta_ref > 0.0 && self.rho_ref > 0.0) {
            return bad("eos.theta_ref and eos.rho_ref must be positive");
        }
        Ok(())
    }

    /// `rho^gamma + rho theta + (a f / 3) theta^4`.
    pub fn pressure(&self, rho: f64, theta: f64, f_lambda: f64) -> f64 {
        rho.powf(self.gamma) + rho * theta + self.a * f_lambda / 3.0 * theta.powi(4)
    }

    /// Thermal part of the pressure, the part doing work on the thermal energy.
    pub fn thermal_pressure(&self, rho: f64, theta: f64, f_lambda: f64) -> f64 {
        rho * theta + self.a * f_lambda / 3.0 * theta.powi(4)
    }

    /// Pressure plus magnetic pressure plus artificial pressure.
    pub fn total_pressure(&self, rho: f64, b: f64, theta: f64, f_lambda: f64) -> f64 {
        self.pressure(rho, theta, f_lambda)
            + 0.5 * b * b
            + self.delta * (rho + b).powf(self.beta)
    }

    /// Squared fast magnetosonic speed including the artificial pressure.
    pub fn sound_speed_sq(&self, rho: f64, b: f64, theta: f64) -> f64 {
        if rho <= 0.0 {
            return 0.0;
        }
        let art = self.delta * self.beta * (rho + b).powf(self.beta - 1.0);
        self.gamma * rho.powf(self.gamma - 1.0) + theta + b * b / rho + art * (1.0 + b / rho)
    }

    pub fn internal_energy(&self, rho: f64, theta: f64, f_lambda: f64) -> Result<f64> {
        if !(rho > 0.0) {
            return Err(Error::Vacuum("internal energy"));
        }
        Ok(rho.powf(self.gamma - 1.0) / (self.gamma - 1.0)
            + theta
            + self.a * f_lambda / rho * theta.powi(4))
    }

    /// `rho e`, defined down to vacuum.
    pub fn internal_energy_density(&self, rho: f64, theta: f64, f_lambda: f64) -> f64 {
        rho.powf(self.gamma) / (self.gamma - 1.0) + self.thermal_energy(rho, theta, f_lambda)
    }

    /// Thermal energy density `rho theta + a f theta^4`, the evolved variable.
    pub fn thermal_energy(&self, rho: f64, theta: f64, f_lambda: f64) -> f64 {
        rho * theta + self.a * f_lambda * theta.powi(4)
    }

    pub fn entropy(&self, rho: f64, theta: f64, f_lambda: f64) -> Result<f64> {
        if !(rho > 0.0 && theta > 0.0) {
            return Err(Error::Domain("entropy requires rho > 0 and theta > 0"));
        }
        Ok((theta / rho).ln() + 4.0 * self.a * f_lambda / 3.0 * theta.powi(3) / rho)
    }

    /// `(mu, eta, kappa)` for temperature `theta` and extension multipliers `g`, `h`.
    pub fn transport_coeffs(&self, theta: f64, g: f64, h: f64) -> (f64, f64, f64) {
        (
            self.mu_bar * (1.0 + theta) * g,
            self.eta_bar * (1.0 + theta) * g,
            self.kappa_bar * (1.0 + theta.powi(3)) * h,
        )
    }

    pub fn stress(&self, theta: f64, grad_u: &Tensor2, g: f64) -> Tensor2 {
        let (mu, eta, _) = self.transport_coeffs(theta, g, 1.0);
        stress_with(mu, eta, grad_u)
    }

    /// Helmholtz function `rho (e - theta_ref s)`.
    pub fn helmholtz(&self, rho: f64, theta: f64, f_lambda: f64) -> Result<f64> {
        let e = self.internal_energy(rho, theta, f_lambda)?;
        let s = self.entropy(rho, theta, f_lambda)?;
        Ok(rho * (e - self.theta_ref * s))
    }

    /// Partial derivative of the Helmholtz function in `rho`.
    pub fn helmholtz_drho(&self, rho: f64, theta: f64) -> Result<f64> {
        if !(rho > 0.0 && theta > 0.0) {
            return Err(Error::Domain("Helmholtz derivative requires rho, theta > 0"));
        }
        let g = self.gamma;
        Ok(g * rho.powf(g - 1.0) / (g - 1.0) + theta
            - self.theta_ref * ((theta / rho).ln() - 1.0))
    }

    /// `H(rho, theta) - dH/drho(rho_ref, 1)(rho - rho_ref) - H(rho_ref, 1)`.
    pub fn helmholtz_renormalized(&self, rho: f64, theta: f64, f_lambda: f64) -> Result<f64> {
        let r = self.rho_ref;
        Ok(self.helmholtz(rho, theta, f_lambda)?
            - self.helmholtz_drho(r, 1.0)? * (rho - r)
            - self.helmholtz(r, 1.0, f_lambda)?)
    }

    /// Inverts `rho theta + a f theta^4 = q_th` for `theta >= 0`.
    pub fn recover_temperature(&self, rho: f64, q_th: f64, f_lambda: f64) -> f64 {
        solve_quartic_quintic(rho, self.a * f_lambda, 0.0, q_th)
    }

    /// Inverts `rho theta + a f theta^4 + coeff theta^5 = q_th`, the implicit sink update.
    pub fn recover_temperature_with_sink(
        &self,
        rho: f64,
        q_th: f64,
        f_lambda: f64,
        coeff: f64,
    ) -> f64 {
        solve_quartic_quintic(rho, self.a * f_lambda, coeff, q_th)
    }
}

/// `mu (G + G^T - tr G I) + eta tr G I`.
pub fn stress_with(mu: f64, eta: f64, g: &Tensor2) -> Tensor2 {
    let div = g[0][0] + g[1][1];
    [
        [
            mu * (2.0 * g[0][0] - div) + eta * div,
            mu * (g[0][1] + g[1][0]),
        ],
        [
            mu * (g[1][0] + g[0][1]),
            mu * (2.0 * g[1][1] - div) + eta * div,
        ],
    ]
}

/// `S : G` written as a sum of squares so it is nonnegative in floating point.
pub fn stress_work(mu: f64, eta: f64, g: &Tensor2) -> f64 {
    let shear = g[0][1] + g[1][0];
    let diff = g[0][0] - g[1][1];
    let div = g[0][0] + g[1][1];
    mu * (diff * diff + shear * shear) + eta * div * div
}

pub fn contract(s: &Tensor2, g: &Tensor2) -> f64 {
    s[0][0] * g[0][0] + s[0][1] * g[0][1] + s[1][0] * g[1][0] + s[1][1] * g[1][1]
}

/// Root `t >= 0` of `r t + a t^4 + c t^5 = q` for `r, a, c >= 0`, `q >= 0`.
fn solve_quartic_quintic(r: f64, a: f64, c: f64, q: f64) -> f64 {
    if !(q > 0.0) {
        return 0.0;
    }
    let mut t = f64::INFINITY;
    if r > 0.0 {
        t = t.min(q / r);
    }
    if a > 0.0 {
        t = t.min((q / a).powf(0.25));
    }
    if c > 0.0 {
        t = t.min((q / c).powf(0.2));
    }
    if !t.is_finite() {
        return 0.0;
    }
    // the residual is convex and increasing, so Newton from an upper bound decreases monotonically
    for _ in 0..200 {
        let t3 = t * t * t;
        let res = r * t + a * t3 * t + c * t3 * t * t - q;
        let d = r + 4.0 * a * t3 + 5.0 * c * t3 * t;
        if d <= 0.0 {
            break;
        }
        let step = res / d;
        let next = (t - step).max(0.0);
        if (t - next).abs() <= 1e-15 * t.max(1e-300) || next >= t {
            t = next.min(t);
            break;
        }
        t = next;
    }
    t
}
