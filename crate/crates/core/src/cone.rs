//! Two-zonal invariant cones and the existence of periodic orbits.
//!
//! A two-zonal cone is a fixed point of the composite slope map
//! `S+ o S-`, i.e. a pair of phase angles `(tau-, tau+)` with
//!
//! ```text
//! v2(tau+) = u0(tau-)      (residual rA)
//! v1(tau+) = u1(tau-)      (residual rB)
//! ```
//!
//! The orbits on the cone are closed exactly when the radial return ratio
//! over one revolution equals one (residual rC).

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use serde::Serialize;

use crate::auxiliary::{g_unchecked, phi, phi_prime, tau_hat};
use crate::error::{Error, Result};
use crate::poincare::{
    entry_slope, entry_slope_derivative, exit_slope, exit_slope_derivative, radial_ratio_unchecked,
};
use crate::system::{EigenTriple, PwlSystem};

/// `|gamma|` below this counts as zero.
pub const GAMMA_ZERO_TOL: f64 = 1e-12;
/// Relative tolerance for `lambda+ = lambda-`.
pub const LAMBDA_EQ_TOL: f64 = 1e-9;

/// Numerical knobs of the cone solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    /// Grid nodes per phase-angle axis.
    pub grid: usize,
    /// Newton stops once the residual is below this, relative to the slope magnitude.
    pub residual_tol: f64,
    /// `|r - 1|` below this classifies a cone as a center.
    pub center_tol: f64,
    /// `sigma_min / sigma_max` of the Jacobian below this marks a continuum.
    pub degeneracy_tol: f64,
    /// Roots closer than this (max-norm in angle space) are merged.
    pub dedupe_tol: f64,
    pub max_newton_iter: usize,
    /// Points sampled along a continuum family.
    pub family_samples: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            grid: 256,
            residual_tol: 1e-12,
            center_tol: 1e-9,
            degeneracy_tol: 1e-8,
            dedupe_tol: 1e-8,
            max_newton_iter: 100,
            family_samples: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConeKind {
    /// The common focus plane, present exactly when `lambda+ = lambda-`.
    Trivial,
    NonTrivial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Dynamics {
    Center,
    StableFocus,
    UnstableFocus,
}

/// An isolated two-zonal invariant cone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConeSolution {
    pub tau_minus: f64,
    pub tau_plus: f64,
    /// Slope `z / y` where the cone leaves the plane into the minus zone.
    pub u0: f64,
    /// Slope `z / y` where the cone re-enters the plane from the minus zone.
    pub u1: f64,
    /// `y2 / y0` over one revolution.
    pub return_ratio: f64,
    /// Relative sensitivity of the return ratio to the phase angles.
    pub ratio_condition: f64,
    pub kind: ConeKind,
    pub dynamics: Dynamics,
}

/// One point of a continuum of cones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FamilyPoint {
    pub tau_minus: f64,
    pub tau_plus: f64,
    pub return_ratio: f64,
    pub dynamics: Dynamics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FamilySource {
    /// Cotangent relation available in closed form (`gamma+- = 0`, equal `lambda`).
    Omega,
    /// Traced numerically along the zero set of `rA`.
    Continuation,
}

/// A one-parameter family of cones, sampled.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeFamily {
    pub source: FamilySource,
    pub points: Vec<FamilyPoint>,
}

impl ConeFamily {
    pub fn has_center(&self) -> bool {
        self.points.iter().any(|p| p.dynamics == Dynamics::Center)
    }
}

/// Output of the cone solver: isolated cones sorted by `(tau-, tau+)`, and
/// any continuum families.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeSearch {
    pub cones: Vec<ConeSolution>,
    pub families: Vec<ConeFamily>,
}

/// Outcome of the necessary-condition screen on `(gamma+-, lambda+-)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Screen {
    Pass,
    FailA,
    FailB,
    FailC,
    NotApplicable,
}

impl Screen {
    pub fn failed(self) -> bool {
        matches!(self, Screen::FailA | Screen::FailB | Screen::FailC)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExistenceReport {
    pub cones: Vec<ConeSolution>,
    pub families: Vec<ConeFamily>,
    pub periodic: bool,
    pub necessary_screen: Screen,
    pub notes: Vec<String>,
}

fn lambdas_equal(system: &PwlSystem) -> bool {
    let (lm, lp) = (system.minus.eigen.lambda(), system.plus.eigen.lambda());
    (lp - lm).abs() <= LAMBDA_EQ_TOL * lm.abs().max(lp.abs()).max(1.0)
}

fn both_gamma_zero(system: &PwlSystem) -> bool {
    system.minus.eigen.gamma().abs() < GAMMA_ZERO_TOL && system.plus.eigen.gamma().abs() < GAMMA_ZERO_TOL
}

/// Residuals of the three existence conditions at `(tau-, tau+)`.
///
/// `rA = v2(tau+) - u0(tau-)`, `rB = v1(tau+) - u1(tau-)` and
/// `rC = g_{gamma-}(tau-) g_{gamma+}(tau+) e^{lambda+ tau+/beta+ + lambda- tau-/beta-} - 1`.
pub fn theorem41_residuals(system: &PwlSystem, tau_minus: f64, tau_plus: f64) -> Result<[f64; 3]> {
    let (em, ep) = (&system.minus.eigen, &system.plus.eigen);
    for (name, e, tau) in [("tau-", em, tau_minus), ("tau+", ep, tau_plus)] {
        let limit = tau_hat(e.gamma()).tau_hat;
        if !(tau > 0.0 && tau < limit) {
            return Err(Error::Domain(format!("{name} = {tau} outside (0, {limit})")));
        }
    }
    let [ra, rb] = slope_residuals(em, ep, tau_minus, tau_plus);
    Ok([ra, rb, return_ratio(em, ep, tau_minus, tau_plus) - 1.0])
}

fn slope_residuals(em: &EigenTriple, ep: &EigenTriple, tm: f64, tp: f64) -> [f64; 2] {
    [exit_slope(ep, tp) - entry_slope(em, tm), entry_slope(ep, tp) - exit_slope(em, tm)]
}

fn return_ratio(em: &EigenTriple, ep: &EigenTriple, tm: f64, tp: f64) -> f64 {
    let exponent = ep.lambda() * tp / ep.beta() + em.lambda() * tm / em.beta();
    g_unchecked(em.gamma(), tm) * g_unchecked(ep.gamma(), tp) * exponent.exp()
}

/// `d ln g_gamma(tau) / d tau + lambda / beta`.
fn log_ratio_rate(e: &EigenTriple, tau: f64) -> f64 {
    let g = e.gamma();
    phi_prime(-g, tau) / phi(-g, tau) - phi_prime(g, tau) / phi(g, tau) + 2.0 * g + e.lambda() / e.beta()
}

fn ratio_condition(em: &EigenTriple, ep: &EigenTriple, tm: f64, tp: f64) -> f64 {
    (tm * log_ratio_rate(em, tm)).abs() + (tp * log_ratio_rate(ep, tp)).abs()
}

fn jacobian(em: &EigenTriple, ep: &EigenTriple, tm: f64, tp: f64) -> Matrix2<f64> {
    Matrix2::new(
        -entry_slope_derivative(em, tm),
        exit_slope_derivative(ep, tp),
        -exit_slope_derivative(em, tm),
        entry_slope_derivative(ep, tp),
    )
}

fn dynamics_from_ratio(ratio: f64, tol: f64) -> Dynamics {
    if (ratio - 1.0).abs() < tol {
        Dynamics::Center
    } else if ratio < 1.0 {
        Dynamics::StableFocus
    } else {
        Dynamics::UnstableFocus
    }
}

fn dynamics_from_log(log_ratio: f64, tol: f64) -> Dynamics {
    dynamics_from_ratio(log_ratio.exp(), tol)
}

/// Center / focus type of a cone solving the slope conditions.
///
/// Isolated cones use the radial return ratio over both half-maps. The
/// trivial cone uses the sign of `alpha+/beta+ + alpha-/beta-`, and systems
/// with `gamma+- = 0` the sign of the common `lambda`.
pub fn classify_dynamics(system: &PwlSystem, cone: &ConeSolution, center_tol: f64) -> Dynamics {
    let (em, ep) = (&system.minus.eigen, &system.plus.eigen);
    if both_gamma_zero(system) {
        let lambda = 0.5 * (em.lambda() + ep.lambda());
        let dwell = cone.tau_minus / em.beta() + cone.tau_plus / ep.beta();
        return dynamics_from_log(lambda * dwell, center_tol);
    }
    if cone.kind == ConeKind::Trivial {
        let sum = ep.alpha() / ep.beta() + em.alpha() / em.beta();
        return dynamics_from_log(PI * sum, center_tol);
    }
    let ratio =
        (radial_ratio_unchecked(em, cone.tau_minus) * radial_ratio_unchecked(ep, cone.tau_plus)).abs();
    dynamics_from_ratio(ratio, center_tol)
}

fn build_cone(system: &PwlSystem, tm: f64, tp: f64, kind: ConeKind, cfg: &SolverConfig) -> ConeSolution {
    let (em, ep) = (&system.minus.eigen, &system.plus.eigen);
    let mut cone = ConeSolution {
        tau_minus: tm,
        tau_plus: tp,
        u0: entry_slope(em, tm),
        u1: exit_slope(em, tm),
        return_ratio: return_ratio(em, ep, tm, tp),
        ratio_condition: ratio_condition(em, ep, tm, tp),
        kind,
        dynamics: Dynamics::Center,
    };
    cone.dynamics = classify_dynamics(system, &cone, cfg.center_tol);
    cone
}

/// Phase-angle grid on `(0, tau_hat)`, split evenly on both sides of `pi`.
fn axis_nodes(gamma: f64, count: usize) -> Vec<f64> {
    let limit = tau_hat(gamma).tau_hat;
    let eps = 1e-6 * limit;
    let low = (count / 2).max(2);
    let high = count.saturating_sub(low).max(2);
    let mut nodes: Vec<f64> = (0..low).map(|i| eps + (PI - eps) * i as f64 / (low - 1) as f64).collect();
    let top = limit - eps;
    nodes.extend((1..=high).map(|i| PI + (top - PI) * i as f64 / high as f64));
    nodes
}

struct Root {
    tau: Vector2<f64>,
    degenerate: bool,
}

struct Newton<'a> {
    em: &'a EigenTriple,
    ep: &'a EigenTriple,
    limit_minus: f64,
    limit_plus: f64,
    cfg: &'a SolverConfig,
}

impl Newton<'_> {
    fn inside(&self, x: &Vector2<f64>) -> bool {
        x.x > 0.0 && x.x < self.limit_minus && x.y > 0.0 && x.y < self.limit_plus
    }

    fn residual(&self, x: &Vector2<f64>) -> Vector2<f64> {
        let [a, b] = slope_residuals(self.em, self.ep, x.x, x.y);
        Vector2::new(a, b)
    }

    fn scale(&self, x: &Vector2<f64>) -> f64 {
        entry_slope(self.em, x.x).abs().max(exit_slope(self.em, x.x).abs()).max(1.0)
    }

    /// Damped Newton with a pseudo-inverse step, so it also converges onto
    /// a curve of solutions where the Jacobian is rank one.
    fn solve(&self, start: Vector2<f64>) -> Option<Root> {
        let mut x = start;
        let mut r = self.residual(&x);
        let mut norm = r.amax();
        for _ in 0..self.cfg.max_newton_iter {
            if !norm.is_finite() {
                return None;
            }
            if norm <= self.cfg.residual_tol * self.scale(&x) {
                break;
            }
            let jac = jacobian(self.em, self.ep, x.x, x.y);
            let step = jac.svd(true, true).solve(&(-r), 1e-14 * jac.amax()).ok()?;
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..50 {
                let trial = x + step * t;
                if self.inside(&trial) {
                    let rt = self.residual(&trial);
                    if rt.amax() < norm {
                        x = trial;
                        r = rt;
                        norm = rt.amax();
                        accepted = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        // rounding can stall slightly above the target; accept a small slack
        if !(norm <= 1e3 * self.cfg.residual_tol * self.scale(&x)) {
            return None;
        }
        let sv = jacobian(self.em, self.ep, x.x, x.y).singular_values();
        let (hi, lo) = (sv.max(), sv.min());
        let degenerate = hi == 0.0 || lo / hi < self.cfg.degeneracy_tol;
        Some(Root { tau: x, degenerate })
    }
}

/// Locate all two-zonal invariant cones of `system`.
///
/// The rectangle `(0, tau_hat-) x (0, tau_hat+)` is scanned on a grid for
/// cells where both `rA` and `rB` change sign; damped Newton is started from
/// each such cell and converged roots are deduplicated. A rank-deficient
/// Jacobian at a root switches to family mode, where the continuum is
/// sampled instead of reported point by point. When `lambda+ = lambda-` the
/// trivial cone at `(pi, pi)` is always included.
pub fn solve_invariant_cones(system: &PwlSystem, cfg: &SolverConfig) -> Result<ConeSearch> {
    let (em, ep) = (&system.minus.eigen, &system.plus.eigen);
    let nodes_m = axis_nodes(em.gamma(), cfg.grid);
    let nodes_p = axis_nodes(ep.gamma(), cfg.grid);
    let u0: Vec<f64> = nodes_m.iter().map(|&t| entry_slope(em, t)).collect();
    let u1: Vec<f64> = nodes_m.iter().map(|&t| exit_slope(em, t)).collect();
    let v1: Vec<f64> = nodes_p.iter().map(|&t| entry_slope(ep, t)).collect();
    let v2: Vec<f64> = nodes_p.iter().map(|&t| exit_slope(ep, t)).collect();

    let newton = Newton {
        em,
        ep,
        limit_minus: tau_hat(em.gamma()).tau_hat,
        limit_plus: tau_hat(ep.gamma()).tau_hat,
        cfg,
    };

    let changes = |vals: [f64; 4]| {
        let pos = vals.iter().any(|&v| v > 0.0);
        let neg = vals.iter().any(|&v| v < 0.0);
        let zero = vals.iter().any(|&v| v == 0.0);
        (pos && neg) || zero
    };

    let mut roots: Vec<Root> = Vec::new();
    for i in 0..nodes_m.len() - 1 {
        for j in 0..nodes_p.len() - 1 {
            let ra = [v2[j] - u0[i], v2[j + 1] - u0[i], v2[j] - u0[i + 1], v2[j + 1] - u0[i + 1]];
            if !changes(ra) {
                continue;
            }
            let rb = [v1[j] - u1[i], v1[j + 1] - u1[i], v1[j] - u1[i + 1], v1[j + 1] - u1[i + 1]];
            if !changes(rb) {
                continue;
            }
            let seed = Vector2::new(0.5 * (nodes_m[i] + nodes_m[i + 1]), 0.5 * (nodes_p[j] + nodes_p[j + 1]));
            if let Some(root) = newton.solve(seed) {
                let dup = roots.iter().any(|r| (r.tau - root.tau).amax() < cfg.dedupe_tol);
                if !dup {
                    roots.push(root);
                }
            }
        }
    }

    let trivial_exists = lambdas_equal(system);
    let is_trivial_point = |t: &Vector2<f64>| (t.x - PI).abs() < 1e-8 && (t.y - PI).abs() < 1e-8;

    let mut cones: Vec<ConeSolution> = Vec::new();
    let mut degenerate = false;
    for root in &roots {
        if trivial_exists && is_trivial_point(&root.tau) {
            continue;
        }
        if root.degenerate {
            degenerate = true;
            continue;
        }
        cones.push(build_cone(system, root.tau.x, root.tau.y, ConeKind::NonTrivial, cfg));
    }
    if trivial_exists {
        cones.push(build_cone(system, PI, PI, ConeKind::Trivial, cfg));
    }
    cones.sort_by(|a, b| a.tau_minus.total_cmp(&b.tau_minus).then(a.tau_plus.total_cmp(&b.tau_plus)));

    let mut families = Vec::new();
    if degenerate {
        let family = match omega_family(system, cfg.family_samples, cfg.center_tol) {
            Ok(f) => f,
            Err(_) => continue_family(system, &nodes_m, &nodes_p, cfg),
        };
        if !family.points.is_empty() {
            families.push(family);
        }
    }
    Ok(ConeSearch { cones, families })
}

/// Sample the zero set of `rA` column by column and keep points where `rB`
/// vanishes as well.
fn continue_family(system: &PwlSystem, nodes_m: &[f64], nodes_p: &[f64], cfg: &SolverConfig) -> ConeFamily {
    let (em, ep) = (&system.minus.eigen, &system.plus.eigen);
    let stride = (nodes_m.len() / cfg.family_samples.max(1)).max(1);
    let mut points = Vec::new();
    for &tm in nodes_m.iter().step_by(stride) {
        let target = entry_slope(em, tm);
        let f = |tp: f64| exit_slope(ep, tp) - target;
        for w in nodes_p.windows(2) {
            let (fa, fb) = (f(w[0]), f(w[1]));
            if fa.signum() == fb.signum() {
                continue;
            }
            let tp = crate::poincare::bisect(f, w[0], w[1], fa);
            let [_, rb] = slope_residuals(em, ep, tm, tp);
            let scale = target.abs().max(1.0);
            if rb.abs() <= 1e-8 * scale {
                let ratio = return_ratio(em, ep, tm, tp);
                points.push(FamilyPoint {
                    tau_minus: tm,
                    tau_plus: tp,
                    return_ratio: ratio,
                    dynamics: dynamics_from_ratio(ratio, cfg.center_tol),
                });
            }
        }
    }
    ConeFamily { source: FamilySource::Continuation, points }
}

/// The cone family of a system with `gamma+- = 0` and `lambda+ = lambda-`:
/// the curve `cot(tau-/2) / cot(tau+/2) = -beta+/beta-` together with
/// `(pi, pi)`, sampled at `samples` values of `tau-`.
pub fn omega_family(system: &PwlSystem, samples: usize, center_tol: f64) -> Result<ConeFamily> {
    if !both_gamma_zero(system) {
        return Err(Error::NotApplicable("the cotangent family needs gamma+ = gamma- = 0".into()));
    }
    if !lambdas_equal(system) {
        return Err(Error::NotApplicable("the cotangent family needs lambda+ = lambda-".into()));
    }
    let (em, ep) = (&system.minus.eigen, &system.plus.eigen);
    let lambda = 0.5 * (em.lambda() + ep.lambda());
    let point = |tm: f64, tp: f64| {
        let log_ratio = lambda * (tm / em.beta() + tp / ep.beta());
        FamilyPoint {
            tau_minus: tm,
            tau_plus: tp,
            return_ratio: log_ratio.exp(),
            dynamics: dynamics_from_log(log_ratio, center_tol),
        }
    };
    let n = samples.max(1);
    let mut points: Vec<FamilyPoint> = (0..n)
        .map(|i| {
            let tm = 2.0 * PI * (i as f64 + 0.5) / n as f64;
            point(tm, omega_partner(em.beta(), ep.beta(), tm))
        })
        .collect();
    if !points.iter().any(|p| (p.tau_minus - PI).abs() < 1e-12 && (p.tau_plus - PI).abs() < 1e-12) {
        points.push(point(PI, PI));
    }
    points.sort_by(|a, b| a.tau_minus.total_cmp(&b.tau_minus));
    Ok(ConeFamily { source: FamilySource::Omega, points })
}

/// `tau+` solving `cot(tau+/2) = -(beta-/beta+) cot(tau-/2)` in `(0, 2 pi)`.
pub fn omega_partner(beta_minus: f64, beta_plus: f64, tau_minus: f64) -> f64 {
    let (s, c) = (0.5 * tau_minus).sin_cos();
    2.0 * (beta_plus * s).atan2(-beta_minus * c)
}

/// Necessary conditions on `(gamma+-, lambda+-)` for periodic orbits.
pub fn necessary_screen(system: &PwlSystem) -> Screen {
    let (em, ep) = (&system.minus.eigen, &system.plus.eigen);
    let zero = |g: f64| g.abs() < GAMMA_ZERO_TOL;
    let (gm, gp) = (em.gamma(), ep.gamma());
    let (lm, lp) = (em.lambda(), ep.lambda());
    if zero(gm) && zero(gp) {
        return if lm * lp <= 0.0 { Screen::Pass } else { Screen::FailA };
    }
    if (gm >= 0.0 || zero(gm)) && (gp >= 0.0 || zero(gp)) {
        return if lm.min(lp) < 0.0 { Screen::Pass } else { Screen::FailB };
    }
    if (gm <= 0.0 || zero(gm)) && (gp <= 0.0 || zero(gp)) {
        return if lm.max(lp) > 0.0 { Screen::Pass } else { Screen::FailC };
    }
    Screen::NotApplicable
}

/// Result of the single-zone cone test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OneZoneCheck {
    pub has_cone: bool,
    /// `e^{2 pi alpha/beta} (1 - e^{2 pi gamma}) / (beta^2 (1 + gamma^2))`,
    /// zero exactly when `gamma = 0`.
    pub witness: f64,
    /// Scale-free part `1 - e^{2 pi gamma}` of the witness.
    pub scaled_witness: f64,
}

/// Whether the linear system `x' = A x` of one zone has two-zonal invariant
/// cones, which happens iff `lambda = alpha`.
pub fn one_zone_cone_check(eigen: &EigenTriple) -> OneZoneCheck {
    let (g, b) = (eigen.gamma(), eigen.beta());
    let scaled = -(2.0 * PI * g).exp_m1();
    let witness = (2.0 * PI * eigen.alpha() / b).exp() * scaled / (b * b * (1.0 + g * g));
    OneZoneCheck { has_cone: g.abs() < 1e-9, witness, scaled_witness: scaled }
}

/// Full existence analysis: cones, families, screen and a periodic verdict.
pub fn analyze(system: &PwlSystem, cfg: &SolverConfig) -> Result<ExistenceReport> {
    let search = solve_invariant_cones(system, cfg)?;
    let screen = necessary_screen(system);
    let mut notes = Vec::new();
    let (em, ep) = (&system.minus.eigen, &system.plus.eigen);
    notes.push(format!(
        "gamma- = {:.6e}, gamma+ = {:.6e}, lambda- = {:.6e}, lambda+ = {:.6e}",
        em.gamma(),
        ep.gamma(),
        em.lambda(),
        ep.lambda()
    ));
    for cone in &search.cones {
        notes.push(format!(
            "{:?} cone at (tau-, tau+) = ({:.12}, {:.12}): r - 1 = {:.3e} (condition {:.3e}), {:?}",
            cone.kind,
            cone.tau_minus,
            cone.tau_plus,
            cone.return_ratio - 1.0,
            cone.ratio_condition,
            cone.dynamics
        ));
    }
    for family in &search.families {
        notes.push(format!("{:?} family of cones sampled at {} points", family.source, family.points.len()));
    }
    if both_gamma_zero(system) && !lambdas_equal(system) {
        notes.push("gamma+- = 0 with lambda+ != lambda-: no two-zonal cones exist".into());
    }
    if screen.failed() {
        notes.push(format!("necessary condition violated ({screen:?}): no periodic orbits"));
    }
    let periodic = search.cones.iter().any(|c| c.dynamics == Dynamics::Center)
        || search.families.iter().any(ConeFamily::has_center);
    Ok(ExistenceReport {
        cones: search.cones,
        families: search.families,
        periodic,
        necessary_screen: screen,
        notes,
    })
}
