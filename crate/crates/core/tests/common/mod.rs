#![allow(dead_code)]

use proptest::prelude::*;

use pwlcone::{EigenTriple, PwlSystem};

/// Focus-type spectra with moderate magnitudes.
pub fn focus_triple() -> impl Strategy<Value = EigenTriple> {
    (-5.0..5.0f64, -5.0..5.0f64, 0.1..5.0f64).prop_map(|(l, a, b)| EigenTriple::new(l, a, b).unwrap())
}

/// Spectra with the real eigenvalue kept away from the complex pair.
pub fn separated_triple() -> impl Strategy<Value = EigenTriple> {
    focus_triple().prop_filter("lambda close to the complex pair", |e| {
        ((e.alpha() - e.lambda()).powi(2) + e.beta().powi(2)).sqrt() > 0.2
    })
}

pub fn system() -> impl Strategy<Value = PwlSystem> {
    (focus_triple(), focus_triple()).prop_map(|(m, p)| PwlSystem::from_eigen(m, p).unwrap())
}

pub fn sign() -> impl Strategy<Value = f64> {
    prop_oneof![Just(1.0), Just(-1.0)]
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Spectra with `|gamma| <= 2`, where half-maps are well conditioned.
pub fn moderate_triple() -> impl Strategy<Value = EigenTriple> {
    (-3.0..3.0f64, -2.0..2.0f64, 0.2..3.0f64).prop_map(|(l, g, b)| EigenTriple::from_gamma(l, g, b).unwrap())
}

pub fn moderate_system() -> impl Strategy<Value = PwlSystem> {
    (moderate_triple(), moderate_triple()).prop_map(|(m, p)| PwlSystem::from_eigen(m, p).unwrap())
}

/// Inputs of the closed-form synthesis drawn from the admissible angle
/// region, kept 2% away from its edges.
pub fn omega_tilde_input() -> impl Strategy<Value = pwlcone::synthesis::SynthesisInput> {
    (0.1..3.0f64, sign(), 0.2..5.0f64, 0.1..20.0f64, sign(), 0.02..0.98f64, 0.02..0.98f64).prop_map(
        |(mag, gs, k, cmag, cs, fm, fp)| {
            use std::f64::consts::PI;
            let gamma = gs * mag;
            let c = cs * cmag;
            let limit_minus = pwlcone::auxiliary::tau_hat(k * gamma).tau_hat;
            let limit_plus = pwlcone::auxiliary::tau_hat(gamma).tau_hat;
            let (tau_minus, tau_plus) = if c * gamma > 0.0 {
                (fm * PI, PI + fp * (limit_plus - PI))
            } else {
                (PI + fm * (limit_minus - PI), fp * PI)
            };
            pwlcone::synthesis::SynthesisInput { gamma, k, c, tau_minus, tau_plus }
        },
    )
}
