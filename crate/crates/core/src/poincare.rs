//! Closed-form zone flows and the Poincare half-maps on the plane `x1 = 0`.
//!
//! A point `(0, y, z)` with `y > 0` enters the minus zone and returns to the
//! plane with `y < 0`; the plus zone does the opposite. By homogeneity the
//! passage only depends on the slope `z / y`, which is parameterized by the
//! phase angle `tau` in `(0, tau_hat)`.

use nalgebra::{Matrix3, Vector2, Vector3};

use crate::auxiliary::{phi, phi_prime, phi_second, tau_hat};
use crate::error::{Error, Result};
use crate::system::{modal_matrix, rotation, scaled_norm, EigenTriple, PwlSystem, ZoneSide};

/// Number of grid points used to bracket the entry-slope inversion.
const INVERSION_GRID: usize = 2048;

/// Precomputed flow operator of a single focus-type zone.
#[derive(Debug, Clone, Copy)]
pub struct ZoneFlow {
    eigen: EigenTriple,
    modal: Matrix3<f64>,
    modal_inv: Matrix3<f64>,
}

impl ZoneFlow {
    pub fn new(eigen: EigenTriple) -> Result<Self> {
        let modal = modal_matrix(&eigen);
        let modal_inv = modal.try_inverse().ok_or(Error::SingularModalMatrix)?;
        if !modal_inv.iter().all(|v| v.is_finite()) {
            return Err(Error::SingularModalMatrix);
        }
        Ok(Self { eigen, modal, modal_inv })
    }

    pub fn eigen(&self) -> &EigenTriple {
        &self.eigen
    }

    /// State at time `t` starting from `x0`.
    pub fn at(&self, x0: &Vector3<f64>, t: f64) -> Vector3<f64> {
        self.at_coords(&(self.modal_inv * x0), t)
    }

    /// Modal coordinates of `x0`, with components that are rounding noise
    /// relative to `|x0|` set to zero so that states on the invariant line or
    /// the focus plane stay there exactly under [`ZoneFlow::at_coords`].
    pub fn coords(&self, x0: &Vector3<f64>) -> Vector3<f64> {
        let mut c = self.modal_inv * x0;
        let tol = 1e-12 * scaled_norm(x0);
        let planar = self.modal.fixed_columns::<2>(0) * Vector2::new(c.x, c.y);
        let axial: Vector3<f64> = self.modal.column(2) * c.z;
        if scaled_norm(&planar) <= tol {
            c.x = 0.0;
            c.y = 0.0;
        } else if scaled_norm(&axial) <= tol {
            c.z = 0.0;
        }
        c
    }

    /// Modal coordinates of `x0` without any snapping.
    pub fn modal_coords(&self, x0: &Vector3<f64>) -> Vector3<f64> {
        self.modal_inv * x0
    }

    /// State at time `t` from modal coordinates.
    pub fn at_coords(&self, c: &Vector3<f64>, t: f64) -> Vector3<f64> {
        let e = &self.eigen;
        let planar = rotation(e.beta() * t) * Vector2::new(c.x, c.y) * (e.alpha() * t).exp();
        let axial = c.z * (e.lambda() * t).exp();
        self.modal * Vector3::new(planar.x, planar.y, axial)
    }

    /// `x1` component at time `t`; cheaper than a full state when scanning.
    pub fn first_component(&self, x0: &Vector3<f64>, t: f64) -> f64 {
        self.at(x0, t).x
    }
}

/// Linear flow of a zone's companion matrix, valid on all of `R^3`.
pub fn zone_flow(eigen: &EigenTriple, x0: &Vector3<f64>, t: f64) -> Result<Vector3<f64>> {
    Ok(ZoneFlow::new(*eigen)?.at(x0, t))
}

fn check_tau(eigen: &EigenTriple, tau: f64) -> Result<()> {
    let limit = tau_hat(eigen.gamma()).tau_hat;
    if tau > 0.0 && tau < limit {
        Ok(())
    } else {
        Err(Error::Domain(format!("phase angle {tau} outside (0, {limit})")))
    }
}

/// Slope `z / y` at the start of a passage lasting phase angle `tau`.
pub fn entry_slope(eigen: &EigenTriple, tau: f64) -> f64 {
    let g = eigen.gamma();
    eigen.lambda() + eigen.beta() * phi_prime(g, tau) / phi(g, tau)
}

/// Slope `z / y` at the end of a passage lasting phase angle `tau`.
pub fn exit_slope(eigen: &EigenTriple, tau: f64) -> f64 {
    let g = eigen.gamma();
    eigen.lambda() - eigen.beta() * phi_prime(-g, tau) / phi(-g, tau)
}

/// `d/dtau` of `beta * phi'_g / phi_g`.
fn log_derivative_slope(gamma: f64, beta: f64, tau: f64) -> f64 {
    let f = phi(gamma, tau);
    let f1 = phi_prime(gamma, tau);
    let f2 = phi_second(gamma, tau);
    beta * (f2 * f - f1 * f1) / (f * f)
}

pub(crate) fn entry_slope_derivative(eigen: &EigenTriple, tau: f64) -> f64 {
    log_derivative_slope(eigen.gamma(), eigen.beta(), tau)
}

pub(crate) fn exit_slope_derivative(eigen: &EigenTriple, tau: f64) -> f64 {
    // d/dtau phi_{-g}(tau) = (1 + g^2) e^{-g tau} sin tau, same functional form
    -log_derivative_slope(-eigen.gamma(), eigen.beta(), tau)
}

/// `(entry_slope, exit_slope)` for a passage through `side`'s zone.
///
/// Both zones use the same parametric form with their own spectra; `side`
/// only documents which zone the caller means.
pub fn slope_ratios(_side: ZoneSide, eigen: &EigenTriple, tau: f64) -> Result<(f64, f64)> {
    check_tau(eigen, tau)?;
    Ok((entry_slope(eigen, tau), exit_slope(eigen, tau)))
}

/// `y_out / y_in` (negative) for a passage with phase angle `tau`.
pub fn radial_ratio(_side: ZoneSide, eigen: &EigenTriple, tau: f64) -> Result<f64> {
    check_tau(eigen, tau)?;
    Ok(radial_ratio_unchecked(eigen, tau))
}

pub(crate) fn radial_ratio_unchecked(eigen: &EigenTriple, tau: f64) -> f64 {
    let g = eigen.gamma();
    -(phi(-g, tau) / phi(g, tau)) * ((g + eigen.alpha() / eigen.beta()) * tau).exp()
}

/// Smallest phase angle whose entry slope equals `slope`.
///
/// Sign changes of `entry_slope - slope` are bracketed on a uniform grid
/// over `(eps, tau_hat - eps)` and the first one is bisected to full
/// precision. No monotonicity of the entry slope is assumed.
pub fn invert_entry_slope(eigen: &EigenTriple, slope: f64) -> Result<f64> {
    if !slope.is_finite() {
        return Err(Error::NoReturn { slope });
    }
    let limit = tau_hat(eigen.gamma()).tau_hat;
    let eps = 1e-9 * limit;
    let f = |tau: f64| entry_slope(eigen, tau) - slope;
    let span = limit - 2.0 * eps;
    let mut lo = eps;
    let mut f_lo = f(lo);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    for i in 1..INVERSION_GRID {
        let hi = eps + span * i as f64 / (INVERSION_GRID - 1) as f64;
        let f_hi = f(hi);
        if f_hi == 0.0 {
            return Ok(hi);
        }
        if f_hi.signum() != f_lo.signum() {
            return Ok(bisect(f, lo, hi, f_lo));
        }
        lo = hi;
        f_lo = f_hi;
    }
    Err(Error::NoReturn { slope })
}

pub(crate) fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, f_lo: f64) -> f64 {
    let lo_sign = f_lo.signum();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Outcome of one Poincare half-map evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfMapResult {
    pub tau: f64,
    pub dwell_time: f64,
    pub entry_slope: f64,
    pub exit_slope: f64,
    pub radial_ratio: f64,
    pub exit_point: Vector3<f64>,
}

/// Map a point of the separation plane through one zone back to the plane.
///
/// The minus half-map needs `y > 0`, the plus half-map `y < 0`.
pub fn half_map(side: ZoneSide, system: &PwlSystem, point: &Vector3<f64>) -> Result<HalfMapResult> {
    let (y, z) = (point.y, point.z);
    if point.x.abs() > 1e-10 * scaled_norm(point).max(1.0) {
        return Err(Error::Domain(format!("point {point:?} is not on the separation plane")));
    }
    let ok = match side {
        ZoneSide::Minus => y > 0.0,
        ZoneSide::Plus => y < 0.0,
    };
    if !ok {
        return Err(Error::WrongHalfPlane(side.name()));
    }
    let eigen = &system.zone(side).eigen;
    let slope_in = z / y;
    let tau = invert_entry_slope(eigen, slope_in)?;
    let slope_out = exit_slope(eigen, tau);
    let ratio = radial_ratio_unchecked(eigen, tau);
    let y_out = y * ratio;
    Ok(HalfMapResult {
        tau,
        dwell_time: tau / eigen.beta(),
        entry_slope: slope_in,
        exit_slope: slope_out,
        radial_ratio: ratio,
        exit_point: Vector3::new(0.0, y_out, slope_out * y_out),
    })
}

/// Slope transition map `S` of one zone: entry slope to exit slope.
pub fn slope_transition(side: ZoneSide, system: &PwlSystem, slope_in: f64) -> Result<f64> {
    let eigen = &system.zone(side).eigen;
    let tau = invert_entry_slope(eigen, slope_in)?;
    Ok(exit_slope(eigen, tau))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn center_system() -> PwlSystem {
        let e = EigenTriple::new(0.0, 0.0, 1.0).unwrap();
        PwlSystem::from_eigen(e, e).unwrap()
    }

    // full-precision Example 1 minus zone from an independent evaluation of
    // the synthesis formulas
    fn ex1_minus() -> EigenTriple {
        EigenTriple::from_gamma(-10.331988288327022, 1.0, 3.2259000732509877).unwrap()
    }

    #[test]
    fn flow_identity_at_zero() {
        let e = EigenTriple::new(0.3, -1.0, 2.0).unwrap();
        let x0 = Vector3::new(0.5, -2.0, 3.0);
        assert!((zone_flow(&e, &x0, 0.0).unwrap() - x0).norm() < 1e-14);
    }

    #[test]
    fn flow_solves_the_ode() {
        let e = EigenTriple::new(0.3, -1.0, 2.0).unwrap();
        let a = crate::system::ZoneSpec::from_eigen(e).matrix;
        let x0 = Vector3::new(0.5, -2.0, 3.0);
        let h = 1e-6;
        for t in [0.0, 0.4, 1.3] {
            let fd = (zone_flow(&e, &x0, t + h).unwrap() - zone_flow(&e, &x0, t - h).unwrap()) / (2.0 * h);
            let x = zone_flow(&e, &x0, t).unwrap();
            assert!((fd - a * x).norm() < 1e-6 * (1.0 + x.norm()));
        }
    }

    #[test]
    fn example1_entry_point_returns_to_plane() {
        let e = ex1_minus();
        let x0 = Vector3::new(0.0, 4.0, -1.3040);
        let x = zone_flow(&e, &x0, FRAC_PI_4 / e.beta()).unwrap();
        assert!(x.x.abs() < 1e-6, "{}", x.x);
        let (u0, _) = slope_ratios(ZoneSide::Minus, &e, FRAC_PI_4).unwrap();
        assert!((u0 + 0.3260).abs() < 1e-3);
    }

    #[test]
    fn slope_examples() {
        let e = EigenTriple::new(0.0, 0.0, 1.0).unwrap();
        let (u0, u1) = slope_ratios(ZoneSide::Minus, &e, PI).unwrap();
        assert!(u0.abs() < 1e-15 && u1.abs() < 1e-15);

        let e = EigenTriple::new(0.7, 0.7, 1.9).unwrap();
        for tau in [0.2, 1.0, 2.5, 5.0] {
            let (u0, u1) = slope_ratios(ZoneSide::Plus, &e, tau).unwrap();
            assert!((u0 + u1 - 2.0 * 0.7).abs() < 1e-12);
        }
        assert!(slope_ratios(ZoneSide::Minus, &e, 7.0).is_err());
    }

    #[test]
    fn radial_ratio_examples() {
        let e = EigenTriple::new(0.0, 0.0, 2.0).unwrap();
        for tau in [0.3, 3.0, 6.0] {
            assert!((radial_ratio(ZoneSide::Minus, &e, tau).unwrap() + 1.0).abs() < 1e-14);
        }
        // gamma = 1 with alpha = beta forces lambda = 0
        let e = EigenTriple::new(0.0, 1.3, 1.3).unwrap();
        let r = radial_ratio(ZoneSide::Plus, &e, FRAC_PI_4).unwrap();
        assert!((r + 1.7087109871293005).abs() < 1e-12);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let e = EigenTriple::new(-0.4, 0.9, 1.7).unwrap();
        let h = 1e-6;
        for tau in [0.3, 1.9, 3.2] {
            let fd = (entry_slope(&e, tau + h) - entry_slope(&e, tau - h)) / (2.0 * h);
            assert!((fd - entry_slope_derivative(&e, tau)).abs() < 1e-5 * fd.abs().max(1.0));
            let fd = (exit_slope(&e, tau + h) - exit_slope(&e, tau - h)) / (2.0 * h);
            assert!((fd - exit_slope_derivative(&e, tau)).abs() < 1e-5 * fd.abs().max(1.0));
        }
    }

    #[test]
    fn symmetric_center_half_map() {
        let sys = center_system();
        let r = half_map(ZoneSide::Minus, &sys, &Vector3::new(0.0, 1.0, 0.0)).unwrap();
        assert!((r.tau - PI).abs() < 1e-12);
        assert!((r.exit_point - Vector3::new(0.0, -1.0, 0.0)).norm() < 1e-12);
        assert!(slope_transition(ZoneSide::Plus, &sys, 0.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn half_map_rejects_wrong_half_plane() {
        let sys = center_system();
        let p = Vector3::new(0.0, -1.0, 0.3);
        assert_eq!(half_map(ZoneSide::Minus, &sys, &p), Err(Error::WrongHalfPlane("minus")));
        let p = Vector3::new(0.0, 1.0, 0.3);
        assert_eq!(half_map(ZoneSide::Plus, &sys, &p), Err(Error::WrongHalfPlane("plus")));
        let p = Vector3::new(0.0, 0.0, 1.0);
        assert!(half_map(ZoneSide::Minus, &sys, &p).is_err());
    }

    #[test]
    fn half_map_matches_flow() {
        let minus = ex1_minus();
        let plus = EigenTriple::new(-0.2, 0.5, 0.8).unwrap();
        let sys = PwlSystem::from_eigen(minus, plus).unwrap();
        for (side, p) in [
            (ZoneSide::Minus, Vector3::new(0.0, 2.0, 1.5)),
            (ZoneSide::Plus, Vector3::new(0.0, -0.7, 4.0)),
        ] {
            let r = half_map(side, &sys, &p).unwrap();
            let x = zone_flow(&sys.zone(side).eigen, &p, r.dwell_time).unwrap();
            assert!((x - r.exit_point).norm() < 1e-8, "{side:?}: {x:?} vs {:?}", r.exit_point);
            assert!(r.exit_point.y * p.y < 0.0);
        }
    }

    #[test]
    fn transition_fixes_the_focus_line() {
        let e = EigenTriple::new(0.8, -0.3, 1.1).unwrap();
        let sys = PwlSystem::from_eigen(e, EigenTriple::new(-2.0, 0.1, 0.6).unwrap()).unwrap();
        let s = slope_transition(ZoneSide::Minus, &sys, 0.8).unwrap();
        assert!((s - 0.8).abs() < 1e-9);
        let tau = invert_entry_slope(&e, 0.8).unwrap();
        assert!((tau - PI).abs() < 1e-9);
    }
}
