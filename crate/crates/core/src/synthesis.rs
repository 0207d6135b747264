//! Construction of systems that carry a center cone, hence periodic orbits.
//!
//! Given `gamma+ = gamma`, `gamma- = k gamma` (`k > 0`), the offset
//! `c = lambda+ - lambda-` and an admissible pair of phase angles, the
//! existence conditions can be solved in closed form for `beta+-` and
//! `lambda+-`.

use std::f64::consts::{FRAC_PI_4, PI};

use serde::Serialize;

use crate::auxiliary::{g_unchecked, phi, tau_hat};
use crate::cone::theorem41_residuals;
use crate::error::{Error, Result};
use crate::poincare::{entry_slope, exit_slope};
use crate::system::{EigenTriple, PwlSystem};

/// Self-check tolerance on the existence residuals of a synthesized system.
pub const SELF_CHECK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SynthesisInput {
    /// `gamma+`.
    pub gamma: f64,
    /// `gamma- = k * gamma`.
    pub k: f64,
    /// `lambda+ - lambda-`.
    pub c: f64,
    pub tau_minus: f64,
    pub tau_plus: f64,
}

impl SynthesisInput {
    pub fn gamma_minus(&self) -> f64 {
        self.k * self.gamma
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SynthesisOutput {
    pub system: PwlSystem,
    pub eigen_minus: EigenTriple,
    pub eigen_plus: EigenTriple,
    /// Denominator `Delta` of the `beta` formulas (absent for the balanced construction).
    pub delta_value: Option<f64>,
    /// `-ln(g_gamma(tau+) g_{k gamma}(tau-))` (absent for the balanced construction).
    pub nabla_value: Option<f64>,
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Check membership of the angle pair in the admissible synthesis region.
pub fn check_admissible(input: &SynthesisInput) -> Result<()> {
    let SynthesisInput { gamma, k, c, tau_minus, tau_plus } = *input;
    let violation = |msg: String| Err(Error::OmegaTildeViolation(msg));
    if !(k > 0.0) || !k.is_finite() {
        return violation(format!("k = {k} must be positive"));
    }
    if gamma == 0.0 || !gamma.is_finite() {
        return violation(format!("gamma = {gamma} must be non-zero"));
    }
    if c == 0.0 {
        return Err(Error::ZeroOffset);
    }
    let limit_minus = tau_hat(input.gamma_minus()).tau_hat;
    let limit_plus = tau_hat(gamma).tau_hat;
    if !(tau_minus > 0.0 && tau_minus < limit_minus) {
        return violation(format!("tau- = {tau_minus} outside (0, {limit_minus})"));
    }
    if !(tau_plus > 0.0 && tau_plus < limit_plus) {
        return violation(format!("tau+ = {tau_plus} outside (0, {limit_plus})"));
    }
    if tau_minus == PI || tau_plus == PI {
        return violation("phase angles must differ from pi".into());
    }
    let (sm, sp) = (tau_minus.sin(), tau_plus.sin());
    if !(sm * sp < 0.0) {
        return violation(format!("sin tau- * sin tau+ = {} must be negative", sm * sp));
    }
    if sign(sm) * sign(gamma) != sign(c) {
        return violation("sgn(sin tau-) * sgn(gamma) must equal sgn(c)".into());
    }
    Ok(())
}

/// `Delta`, whose sign equals the sign of `gamma` on the admissible region.
pub fn delta_quantity(input: &SynthesisInput) -> Result<f64> {
    check_admissible(input)?;
    Ok(delta_unchecked(input))
}

fn delta_unchecked(input: &SynthesisInput) -> f64 {
    let SynthesisInput { gamma, k, tau_minus: tm, tau_plus: tp, .. } = *input;
    let kg = k * gamma;
    let prefactor = -(1.0 + gamma * gamma) * (1.0 + kg * kg);
    let fraction = tm.sin() * tp.sin() * (-gamma * tp).exp() * (kg * tm).exp() / (phi(-gamma, tp) * phi(kg, tm));
    let bracket = g_unchecked(gamma, tp) - phi(kg, tm) / phi(-kg, tm) * (-2.0 * kg * tm).exp();
    prefactor * fraction * bracket
}

/// `e^{g t} / phi_g(t) + e^{-g t} / phi_{-g}(t)`.
fn paired_weight(gamma: f64, tau: f64) -> f64 {
    (gamma * tau).exp() / phi(gamma, tau) + (-gamma * tau).exp() / phi(-gamma, tau)
}

/// Build the system for an admissible `(gamma, k, c, tau-, tau+)`.
pub fn synthesize(input: &SynthesisInput) -> Result<SynthesisOutput> {
    check_admissible(input)?;
    let SynthesisInput { gamma, k, c, tau_minus: tm, tau_plus: tp } = *input;
    let kg = k * gamma;
    let delta = delta_unchecked(input);
    if delta == 0.0 || !delta.is_finite() {
        return Err(Error::NonPositiveBeta { which: "beta-", value: f64::NAN });
    }
    let beta_minus = -(c / delta) * (1.0 + gamma * gamma) * tp.sin() * paired_weight(gamma, tp);
    let beta_plus = (c / delta) * (1.0 + kg * kg) * tm.sin() * paired_weight(kg, tm);
    for (which, value) in [("beta-", beta_minus), ("beta+", beta_plus)] {
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::NonPositiveBeta { which, value });
        }
    }
    let nabla = -(g_unchecked(gamma, tp) * g_unchecked(kg, tm)).ln();
    let dwell = tp / beta_plus + tm / beta_minus;
    let lambda_minus = (nabla - tp * c / beta_plus) / dwell;
    let lambda_plus = (nabla + tm * c / beta_minus) / dwell;

    let eigen_minus = EigenTriple::from_gamma(lambda_minus, kg, beta_minus)?;
    let eigen_plus = EigenTriple::from_gamma(lambda_plus, gamma, beta_plus)?;
    let system = PwlSystem::from_eigen(eigen_minus, eigen_plus)?;
    self_check(&system, tm, tp)?;
    Ok(SynthesisOutput {
        system,
        eigen_minus,
        eigen_plus,
        delta_value: Some(delta),
        nabla_value: Some(nabla),
    })
}

fn self_check(system: &PwlSystem, tm: f64, tp: f64) -> Result<()> {
    let r = theorem41_residuals(system, tm, tp)?;
    let em = &system.minus.eigen;
    let scale = entry_slope(em, tm).abs().max(exit_slope(em, tm).abs()).max(1.0);
    let ok = r[0].abs() < SELF_CHECK_TOL * scale && r[1].abs() < SELF_CHECK_TOL * scale && r[2].abs() < SELF_CHECK_TOL;
    if ok {
        Ok(())
    } else {
        Err(Error::SelfCheckFailed(r))
    }
}

/// Parameters of the equal-`lambda` construction: the focus plane is then a
/// common invariant cone and it is a center when
/// `alpha+/beta+ + alpha-/beta- = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BalancedInput {
    pub alpha_plus: f64,
    pub beta_plus: f64,
    pub beta_minus: f64,
    pub lambda: f64,
}

/// Build a system whose trivial cone is a center (`c = 0`).
pub fn synthesize_balanced(input: &BalancedInput) -> Result<SynthesisOutput> {
    let BalancedInput { alpha_plus, beta_plus, beta_minus, lambda } = *input;
    for (which, value) in [("beta-", beta_minus), ("beta+", beta_plus)] {
        if !(value > 0.0) {
            return Err(Error::NonPositiveBeta { which, value });
        }
    }
    let alpha_minus = -beta_minus * alpha_plus / beta_plus;
    let eigen_minus = EigenTriple::new(lambda, alpha_minus, beta_minus)?;
    let eigen_plus = EigenTriple::new(lambda, alpha_plus, beta_plus)?;
    let system = PwlSystem::from_eigen(eigen_minus, eigen_plus)?;
    Ok(SynthesisOutput { system, eigen_minus, eigen_plus, delta_value: None, nabla_value: None })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Example {
    One,
    Two,
}

impl Example {
    pub fn input(self) -> SynthesisInput {
        match self {
            Example::One => SynthesisInput { gamma: 1.0, k: 1.0, c: 10.0, tau_minus: FRAC_PI_4, tau_plus: 5.0 * FRAC_PI_4 },
            Example::Two => SynthesisInput { gamma: 1.0, k: 1.0, c: -10.0, tau_minus: 5.0 * FRAC_PI_4, tau_plus: FRAC_PI_4 },
        }
    }
}

/// The two worked example systems.
pub fn example_system(which: Example) -> PwlSystem {
    synthesize(&which.input()).expect("example inputs are admissible").system
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_one_matches_printed_values() {
        let out = synthesize(&Example::One.input()).unwrap();
        let (m, p) = (out.eigen_minus, out.eigen_plus);
        for (got, want) in [
            (m.lambda(), -10.3322),
            (m.alpha(), -7.1060),
            (m.beta(), 3.2259),
            (p.lambda(), -0.3321),
            (p.alpha(), -0.1111),
            (p.beta(), 0.2209),
        ] {
            assert!((got - want).abs() < 1e-3, "{got} vs {want}");
        }
        let a = out.system.minus.matrix;
        assert!((a[(0, 0)] + 24.5442).abs() < 1e-3);
        assert!((a[(1, 0)] - 207.7430).abs() < 1e-3);
        assert!((a[(2, 0)] + 629.2483).abs() < 1e-3);
        assert!(out.delta_value.unwrap() > 0.0);
    }

    #[test]
    fn example_two_is_zone_swap() {
        let one = example_system(Example::One);
        let two = example_system(Example::Two);
        assert!((one.minus.matrix - two.plus.matrix).amax() < 1e-9);
        assert!((one.plus.matrix - two.minus.matrix).amax() < 1e-9);
    }

    #[test]
    fn admissibility_violations() {
        let base = Example::One.input();
        let bad = [
            SynthesisInput { k: -1.0, ..base },
            SynthesisInput { gamma: 0.0, ..base },
            SynthesisInput { tau_plus: 4.5, ..base },
            SynthesisInput { tau_minus: PI, ..base },
            SynthesisInput { tau_plus: 2.0, ..base },
            SynthesisInput { c: -10.0, ..base },
        ];
        for input in bad {
            assert!(matches!(synthesize(&input), Err(Error::OmegaTildeViolation(_))), "{input:?}");
        }
        assert_eq!(synthesize(&SynthesisInput { c: 0.0, ..base }).unwrap_err(), Error::ZeroOffset);
    }

    #[test]
    fn offset_is_reproduced() {
        let input = SynthesisInput { gamma: -0.7, k: 2.0, c: 3.0, tau_minus: 3.5, tau_plus: 1.2 };
        let out = synthesize(&input).unwrap();
        let c = out.eigen_plus.lambda() - out.eigen_minus.lambda();
        assert!(((c - 3.0) / 3.0).abs() < 1e-9);
        assert!(out.delta_value.unwrap() < 0.0);
    }

    #[test]
    fn balanced_construction() {
        let out = synthesize_balanced(&BalancedInput { alpha_plus: 0.3, beta_plus: 0.9, beta_minus: 2.0, lambda: -1.0 }).unwrap();
        let (m, p) = (out.eigen_minus, out.eigen_plus);
        assert!((p.alpha() / p.beta() + m.alpha() / m.beta()).abs() < 1e-15);
        assert_eq!(m.lambda(), p.lambda());
        assert!(synthesize_balanced(&BalancedInput { alpha_plus: 0.3, beta_plus: 0.9, beta_minus: -2.0, lambda: 0.0 }).is_err());
    }
}
