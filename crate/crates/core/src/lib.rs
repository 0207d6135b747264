//! Analysis of homogeneous continuous piecewise-linear systems in three
//! dimensions with two zones separated by the plane `x1 = 0`.
//!
//! Each zone carries a matrix in observable canonical (companion) form with
//! one real eigenvalue and a complex pair. The crate evaluates the zone flows
//! and Poincare half-maps in closed form, locates two-zonal invariant cones,
//! decides whether the dynamics on a cone is a center (a family of periodic
//! orbits) or a focus, synthesizes systems that are guaranteed to carry
//! periodic orbits, and traces orbits across the separation plane.

pub mod auxiliary;
pub mod cone;
pub mod error;
pub mod io;
pub mod poincare;
pub mod simulate;
pub mod synthesis;
pub mod system;

pub use error::{Error, Result};
pub use system::{CanonicalCoeffs, EigenTriple, PwlSystem, ZoneSide, ZoneSpec};
