//! Orbit tracing across the separation plane.
//!
//! Propagation inside a zone uses the exact closed-form flow; crossings of
//! `x1 = 0` are bracketed on a coarse time grid and bisected. A fixed-step
//! Runge-Kutta integrator is provided as an independent oracle for the
//! closed-form flows.

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use crate::auxiliary::tau_hat;
use crate::cone::ConeSolution;
use crate::error::{Error, Result};
use crate::poincare::ZoneFlow;
use crate::system::{scaled_norm, EigenTriple, PwlSystem, ZoneSide};

const ORIGIN_NORM: f64 = 1e-300;
const DIVERGED_NORM: f64 = 1e300;
/// Coarse scan steps per maximal zone passage.
const SCAN_STEPS: f64 = 1024.0;

/// Classic fixed-step fourth-order Runge-Kutta for `x' = A x`.
///
/// Returns the states at `t = 0, step, 2 step, ...` up to `t_end`; the last
/// step is shortened to land on `t_end` exactly.
pub fn oracle_flow(matrix: &Matrix3<f64>, x0: &Vector3<f64>, t_end: f64, step: f64) -> Result<Vec<(f64, Vector3<f64>)>> {
    if !(step > 0.0) || !(t_end >= 0.0) {
        return Err(Error::Domain(format!("oracle_flow needs step > 0 and t_end >= 0 (step={step}, t_end={t_end})")));
    }
    let mut out = Vec::with_capacity((t_end / step) as usize + 2);
    let (mut t, mut x) = (0.0, *x0);
    out.push((t, x));
    let mut n = 0u64;
    while t < t_end {
        let h = step.min(t_end - t);
        let k1 = matrix * x;
        let k2 = matrix * (x + k1 * (0.5 * h));
        let k3 = matrix * (x + k2 * (0.5 * h));
        let k4 = matrix * (x + k3 * h);
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        n += 1;
        t = if h < step { t_end } else { n as f64 * step };
        out.push((t, x));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CrossingDirection {
    IntoMinus,
    IntoPlus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub state: Vector3<f64>,
    pub zone: ZoneSide,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Crossing {
    pub t: f64,
    pub point: Vector3<f64>,
    pub direction: CrossingDirection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StopReason {
    MaxCrossings,
    TimeLimit,
    /// The orbit touched the plane on the line `y = 0`, where the field is tangent.
    Tangency,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitTrace {
    pub samples: Vec<Sample>,
    pub crossings: Vec<Crossing>,
    pub closed: bool,
    /// Gap `|x_return - x_ref|` at the first return to the plane with the
    /// reference sign of `y` (the start when it lies on the plane, otherwise
    /// the first crossing).
    pub closure_residual: Option<f64>,
    /// Time between the reference state and that first return.
    pub period: Option<f64>,
    /// Index into `crossings` of that first return.
    pub return_crossing: Option<usize>,
    pub stop: StopReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceConfig {
    pub samples_per_dwell: usize,
    /// Relative gap below which the orbit counts as closed.
    pub closure_tol: f64,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self { samples_per_dwell: 400, closure_tol: 1e-6 }
    }
}

fn check_norm(x: &Vector3<f64>, t: f64) -> Result<()> {
    let n = scaled_norm(x);
    if n < ORIGIN_NORM {
        Err(Error::OriginReached { t })
    } else if !(n <= DIVERGED_NORM) {
        Err(Error::Diverged { t })
    } else {
        Ok(())
    }
}

/// Zone entered from a point of the plane, or `None` on the tangency line.
fn entered_zone(p: &Vector3<f64>) -> Option<ZoneSide> {
    // x1' = -y on the plane
    if p.y.abs() <= 1e-14 * scaled_norm(p) {
        None
    } else if p.y > 0.0 {
        Some(ZoneSide::Minus)
    } else {
        Some(ZoneSide::Plus)
    }
}

fn has_left(zone: ZoneSide, x1: f64) -> bool {
    match zone {
        ZoneSide::Minus => x1 >= 0.0,
        ZoneSide::Plus => x1 < 0.0,
    }
}

/// Trace an orbit from `x0` for at most `max_crossings` plane crossings or
/// until `t_max`.
pub fn trace_orbit(
    system: &PwlSystem,
    x0: &Vector3<f64>,
    max_crossings: usize,
    t_max: f64,
    cfg: &TraceConfig,
) -> Result<OrbitTrace> {
    if x0.norm() == 0.0 {
        return Err(Error::Domain("trace_orbit needs x0 != 0".into()));
    }
    check_norm(x0, 0.0)?;
    let flows = [ZoneFlow::new(system.minus.eigen)?, ZoneFlow::new(system.plus.eigen)?];
    let flow_of = |zone: ZoneSide| &flows[zone as usize];
    let scan_step = |zone: ZoneSide| {
        let e = &system.zone(zone).eigen;
        tau_hat(e.gamma()).tau_hat / (e.beta() * SCAN_STEPS)
    };

    let mut trace = OrbitTrace {
        samples: Vec::new(),
        crossings: Vec::new(),
        closed: false,
        closure_residual: None,
        period: None,
        return_crossing: None,
        stop: StopReason::TimeLimit,
    };

    let mut start = *x0;
    let on_plane = start.x.abs() <= 1e-12 * scaled_norm(&start);
    let mut zone = if on_plane {
        start.x = 0.0;
        match entered_zone(&start) {
            Some(z) => z,
            None => {
                trace.samples.push(Sample { t: 0.0, state: start, zone: ZoneSide::Plus });
                trace.stop = StopReason::Tangency;
                return Ok(trace);
            }
        }
    } else {
        PwlSystem::side_of(&start)
    };
    let mut reference: Option<(Vector3<f64>, f64)> = on_plane.then_some((start, 0.0));
    let mut t0 = 0.0;

    loop {
        let flow = flow_of(zone);
        // only the initial state is snapped onto invariant sets: at crossings
        // a tiny modal component can be the part that matters
        let coords = if trace.crossings.is_empty() { flow.coords(&start) } else { flow.modal_coords(&start) };
        let h = scan_step(zone);
        let dwell_scale = h * SCAN_STEPS;
        // scan for the first exit from the zone
        let mut k = 1u64;
        let exit = loop {
            let tau = k as f64 * h;
            if t0 + tau >= t_max {
                let x_end = flow.at_coords(&coords, t_max - t0);
                check_norm(&x_end, t_max)?;
                if has_left(zone, x_end.x) {
                    break Some(((k - 1) as f64 * h, t_max - t0));
                }
                break None;
            }
            let x = flow.at_coords(&coords, tau);
            check_norm(&x, t0 + tau)?;
            if has_left(zone, x.x) {
                break Some(((k - 1) as f64 * h, tau));
            }
            k += 1;
        };

        let Some((lo, hi)) = exit else {
            let duration = t_max - t0;
            emit_samples(&mut trace, flow, &start, &coords, t0, duration, zone, cfg, dwell_scale, true);
            trace.stop = StopReason::TimeLimit;
            return Ok(trace);
        };

        let tau_c = bisect_exit(flow, &coords, zone, lo, hi);
        emit_samples(&mut trace, flow, &start, &coords, t0, tau_c, zone, cfg, dwell_scale, false);
        let t_c = t0 + tau_c;
        let mut p = flow.at_coords(&coords, tau_c);
        p.x = 0.0;

        let Some(next) = entered_zone(&p) else {
            trace.samples.push(Sample { t: t_c, state: p, zone });
            trace.stop = StopReason::Tangency;
            return Ok(trace);
        };
        if next == zone {
            // re-entering the same zone means the bracket missed a tangential touch
            trace.samples.push(Sample { t: t_c, state: p, zone });
            trace.stop = StopReason::Tangency;
            return Ok(trace);
        }
        let direction = match next {
            ZoneSide::Minus => CrossingDirection::IntoMinus,
            ZoneSide::Plus => CrossingDirection::IntoPlus,
        };
        trace.crossings.push(Crossing { t: t_c, point: p, direction });
        let index = trace.crossings.len() - 1;

        match reference {
            None => reference = Some((p, t_c)),
            Some((r, t_ref)) => {
                if trace.return_crossing.is_none() && r.y.signum() == p.y.signum() {
                    let gap = scaled_norm(&(p - r));
                    trace.closure_residual = Some(gap);
                    trace.period = Some(t_c - t_ref);
                    trace.return_crossing = Some(index);
                    trace.closed = gap <= cfg.closure_tol * scaled_norm(&r);
                }
            }
        }

        if trace.crossings.len() >= max_crossings {
            trace.samples.push(Sample { t: t_c, state: p, zone: next });
            trace.stop = StopReason::MaxCrossings;
            return Ok(trace);
        }
        zone = next;
        start = p;
        t0 = t_c;
    }
}

fn bisect_exit(flow: &ZoneFlow, coords: &Vector3<f64>, zone: ZoneSide, mut lo: f64, mut hi: f64) -> f64 {
    // down to adjacent floats, well inside 1e-13 max(1, t), so that the
    // crossing depends only on where the sign of x1 flips
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if has_left(zone, flow.at_coords(coords, mid).x) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[allow(clippy::too_many_arguments)]
fn emit_samples(
    trace: &mut OrbitTrace,
    flow: &ZoneFlow,
    start: &Vector3<f64>,
    coords: &Vector3<f64>,
    t0: f64,
    duration: f64,
    zone: ZoneSide,
    cfg: &TraceConfig,
    dwell_scale: f64,
    include_end: bool,
) {
    let per = cfg.samples_per_dwell.max(1);
    let n = per * ((duration / dwell_scale).ceil() as usize).max(1);
    let last = if include_end { n } else { n - 1 };
    for i in 0..=last {
        let tau = duration * i as f64 / n as f64;
        let state = if i == 0 { *start } else { flow.at_coords(coords, tau) };
        trace.samples.push(Sample { t: t0 + tau, state, zone });
    }
}

/// Trace independent orbits on worker threads; results keep the input order.
pub fn trace_many(
    system: &PwlSystem,
    starts: &[Vector3<f64>],
    max_crossings: usize,
    t_max: f64,
    cfg: &TraceConfig,
) -> Vec<Result<OrbitTrace>> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(starts.len().max(1));
    let chunk = starts.len().div_ceil(workers).max(1);
    std::thread::scope(|scope| {
        let handles: Vec<_> = starts
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter().map(|x0| trace_orbit(system, x0, max_crossings, t_max, cfg)).collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("trace worker panicked")).collect()
    })
}

/// The system run backwards in time, written in the coordinates
/// `(x1, -y, z)` where it is again in canonical form.
fn time_reversed(system: &PwlSystem) -> Result<PwlSystem> {
    let rev = |e: &EigenTriple| EigenTriple::new(-e.lambda(), -e.alpha(), e.beta());
    PwlSystem::from_eigen(rev(&system.minus.eigen)?, rev(&system.plus.eigen)?)
}

/// Gap after one revolution starting from the cone's entry ray `(0, 1, u0)`.
///
/// Off-cone perturbations grow by `e^{-(gamma- tau- + gamma+ tau+)}` per
/// revolution, which for negative `gamma` can exceed `1e30`: the rounded
/// start then does not lie on the cone to working precision. In that case
/// the revolution is traced backwards in time, where the same periodic orbit
/// is contracting.
pub fn closure_check(system: &PwlSystem, cone: &ConeSolution) -> Result<f64> {
    let x0 = Vector3::new(0.0, 1.0, cone.u0);
    let (em, ep) = (&system.minus.eigen, &system.plus.eigen);
    let growth = -(em.gamma() * cone.tau_minus + ep.gamma() * cone.tau_plus);
    let (traced, start) = if growth > 0.0 {
        (time_reversed(system)?, Vector3::new(0.0, -1.0, cone.u0))
    } else {
        (*system, x0)
    };
    let (tm, tp) = (&traced.minus.eigen, &traced.plus.eigen);
    let revolution = tau_hat(tm.gamma()).tau_hat / tm.beta() + tau_hat(tp.gamma()).tau_hat / tp.beta();
    let cfg = TraceConfig { samples_per_dwell: 1, ..TraceConfig::default() };
    let trace = trace_orbit(&traced, &start, 2, 2.0 * revolution, &cfg)?;
    match trace.crossings.get(1) {
        Some(c) => {
            let back = if growth > 0.0 { Vector3::new(0.0, -c.point.y, c.point.z) } else { c.point };
            Ok((back - x0).norm())
        }
        None => Err(Error::NoReturn { slope: cone.u0 }),
    }
}
