//! Scalar auxiliary functions for a focus-type zone.
//!
//! Everything in the half-map and cone machinery is expressed through
//!
//! ```text
//! phi_g(t) = 1 - e^{g t} (cos t - g sin t)
//! ```
//!
//! its first positive zero `tau_hat`, and the ratio
//! `g_g(t) = phi_{-g}(t) / phi_g(t) * e^{2 g t}`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Below this |tau| the power series replaces the closed form.
pub const SERIES_THRESHOLD: f64 = 1e-4;

/// First positive zero of `phi_{|gamma|}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiRoot {
    pub gamma: f64,
    pub tau_hat: f64,
}

/// `phi_gamma(tau)`, total on the reals.
pub fn phi(gamma: f64, tau: f64) -> f64 {
    if tau.abs() < SERIES_THRESHOLD {
        phi_series(gamma, tau)
    } else {
        phi_closed(gamma, tau)
    }
}

/// Closed form, rearranged as `2 sin^2(t/2) - expm1(g t) cos t + g e^{g t} sin t`
/// so that the leading `O(1)` terms cancel analytically.
pub fn phi_closed(gamma: f64, tau: f64) -> f64 {
    let half = (0.5 * tau).sin();
    let gt = gamma * tau;
    2.0 * half * half - gt.exp_m1() * tau.cos() + gamma * gt.exp() * tau.sin()
}

/// Power series `(1 + g^2) * sum_{n >= 2} Im[(g + i)^{n-1}] t^n / n!`.
pub fn phi_series(gamma: f64, tau: f64) -> f64 {
    let w = Complex64::new(gamma, 1.0);
    // w^{n-1} and t^n / n!, starting at n = 2
    let mut power = w;
    let mut coeff = 0.5 * tau * tau;
    let mut sum = power.im * coeff;
    for n in 3..60 {
        power *= w;
        coeff *= tau / n as f64;
        let term = power.im * coeff;
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() && n > 4 {
            break;
        }
    }
    (1.0 + gamma * gamma) * sum
}

/// `d/dtau phi_gamma(tau) = (1 + gamma^2) e^{gamma tau} sin tau`.
pub fn phi_prime(gamma: f64, tau: f64) -> f64 {
    (1.0 + gamma * gamma) * (gamma * tau).exp() * tau.sin()
}

/// Second derivative `(1 + gamma^2) e^{gamma tau} (gamma sin tau + cos tau)`.
pub fn phi_second(gamma: f64, tau: f64) -> f64 {
    (1.0 + gamma * gamma) * (gamma * tau).exp() * (gamma * tau.sin() + tau.cos())
}

/// Smallest `tau > 0` with `phi_{|gamma|}(tau) = 0`.
///
/// For `gamma = 0` this is exactly `2 pi`. Otherwise the root is unique in
/// `(pi, 2 pi)` because `phi` is strictly decreasing there, so plain bisection
/// on that bracket followed by a Newton polish is enough.
pub fn tau_hat(gamma: f64) -> PhiRoot {
    let a = gamma.abs();
    if a == 0.0 {
        return PhiRoot { gamma, tau_hat: TAU };
    }
    let (mut lo, mut hi) = (PI, TAU);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if phi_closed(a, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut root = 0.5 * (lo + hi);
    let slope = phi_prime(a, root);
    if slope != 0.0 {
        let polished = root - phi_closed(a, root) / slope;
        if polished > PI && polished < TAU && phi_closed(a, polished).abs() <= phi_closed(a, root).abs() {
            root = polished;
        }
    }
    PhiRoot { gamma, tau_hat: root }
}

/// `true` when `tau` lies in the admissible open interval `(0, tau_hat(gamma))`.
pub fn in_phase_range(gamma: f64, tau: f64) -> bool {
    tau > 0.0 && tau < tau_hat(gamma).tau_hat
}

/// `g_gamma(tau) = phi_{-gamma}(tau) / phi_gamma(tau) * e^{2 gamma tau}` on `(0, tau_hat)`.
pub fn g(gamma: f64, tau: f64) -> Result<f64> {
    if !in_phase_range(gamma, tau) {
        return Err(Error::Domain(format!(
            "g: tau = {tau} outside (0, {}) for gamma = {gamma}",
            tau_hat(gamma).tau_hat
        )));
    }
    Ok(g_unchecked(gamma, tau))
}

pub(crate) fn g_unchecked(gamma: f64, tau: f64) -> f64 {
    phi(-gamma, tau) / phi(gamma, tau) * (2.0 * gamma * tau).exp()
}
