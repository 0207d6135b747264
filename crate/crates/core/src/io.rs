//! JSON system specifications and CSV orbit traces.

use std::io::Write;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulate::{CrossingDirection, OrbitTrace};
use crate::system::{canonicalize, CanonicalCoeffs, EigenTriple, PwlSystem, ZoneSide, ZoneSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoeffsRepr {
    pub delta: f64,
    pub m: f64,
    pub d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenRepr {
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// One zone, given either by its characteristic coefficients or its spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ZoneRepr {
    Coeffs(CoeffsRepr),
    Eigen(EigenRepr),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZonesRepr {
    pub minus: ZoneRepr,
    pub plus: ZoneRepr,
}

/// Arbitrary zone matrices (rows first); converted to canonical form on load.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawRepr {
    #[serde(rename = "A_minus")]
    pub a_minus: [[f64; 3]; 3],
    #[serde(rename = "A_plus")]
    pub a_plus: [[f64; 3]; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemFile {
    Zones(ZonesRepr),
    Raw(RawRepr),
}

fn zone_from_repr(repr: &ZoneRepr) -> Result<ZoneSpec> {
    match *repr {
        ZoneRepr::Coeffs(CoeffsRepr { delta, m, d }) => ZoneSpec::from_coeffs(CanonicalCoeffs::new(delta, m, d)),
        ZoneRepr::Eigen(EigenRepr { lambda, alpha, beta }) => Ok(ZoneSpec::from_eigen(EigenTriple::new(lambda, alpha, beta)?)),
    }
}

fn matrix_from_rows(rows: &[[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| rows[i][j])
}

impl SystemFile {
    pub fn to_system(&self) -> Result<PwlSystem> {
        match self {
            SystemFile::Zones(z) => PwlSystem::new(zone_from_repr(&z.minus)?, zone_from_repr(&z.plus)?),
            SystemFile::Raw(r) => canonicalize(&matrix_from_rows(&r.a_plus), &matrix_from_rows(&r.a_minus)),
        }
    }

    /// Spectral representation of a system.
    pub fn from_system(system: &PwlSystem) -> Self {
        let eigen = |e: &EigenTriple| ZoneRepr::Eigen(EigenRepr { lambda: e.lambda(), alpha: e.alpha(), beta: e.beta() });
        SystemFile::Zones(ZonesRepr { minus: eigen(&system.minus.eigen), plus: eigen(&system.plus.eigen) })
    }
}

/// Parse and validate a system specification.
pub fn parse_system(text: &str) -> Result<PwlSystem> {
    let file: SystemFile = serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
    let finite = match &file {
        SystemFile::Zones(z) => [z.minus, z.plus].iter().all(|r| match r {
            ZoneRepr::Coeffs(c) => [c.delta, c.m, c.d].iter().all(|v| v.is_finite()),
            ZoneRepr::Eigen(e) => [e.lambda, e.alpha, e.beta].iter().all(|v| v.is_finite()),
        }),
        SystemFile::Raw(r) => r.a_minus.iter().chain(r.a_plus.iter()).flatten().all(|v| v.is_finite()),
    };
    if !finite {
        return Err(Error::Malformed("non-finite number in system specification".into()));
    }
    file.to_system()
}

pub fn system_to_json(system: &PwlSystem) -> String {
    serde_json::to_string_pretty(&SystemFile::from_system(system)).expect("system serializes")
}

fn zone_label(zone: ZoneSide) -> &'static str {
    zone.name()
}

fn direction_label(dir: CrossingDirection) -> &'static str {
    match dir {
        CrossingDirection::IntoMinus => "into_minus",
        CrossingDirection::IntoPlus => "into_plus",
    }
}

/// Write a trace as CSV (`t,x1,y,z,zone`), followed by one comment line per crossing.
pub fn write_trace_csv<W: Write>(trace: &OrbitTrace, mut out: W) -> std::io::Result<()> {
    writeln!(out, "t,x1,y,z,zone")?;
    for s in &trace.samples {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{}",
            s.t,
            s.state.x,
            s.state.y,
            s.state.z,
            zone_label(s.zone)
        )?;
    }
    for c in &trace.crossings {
        writeln!(
            out,
            "# crossing t={:.16e} x=0,y={:.16e},z={:.16e} dir={}",
            c.t,
            c.point.y,
            c.point.z,
            direction_label(c.direction)
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceSummary {
    pub closed: bool,
    pub closure_residual: Option<f64>,
    pub period: Option<f64>,
    pub crossings: usize,
    pub samples: usize,
    pub stop: crate::simulate::StopReason,
}

impl From<&OrbitTrace> for TraceSummary {
    fn from(t: &OrbitTrace) -> Self {
        Self {
            closed: t.closed,
            closure_residual: t.closure_residual,
            period: t.period,
            crossings: t.crossings.len(),
            samples: t.samples.len(),
            stop: t.stop,
        }
    }
}
