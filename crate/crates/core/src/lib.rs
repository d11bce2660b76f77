//! Numerical laboratory for rotationally symmetric Ricci flow on `S^{n+1}`.
//!
//! A metric with `SO(n+1)` symmetry is stored as a pair of warping functions
//! on the fixed interval `[-1, 1]`:
//!
//! ```text
//! g = phi(x)^2 dx^2 + psi(x)^2 g_can,       g_can = round metric on S^n,
//! ```
//!
//! where `psi > 0` in the interior and, for closed spheres, `psi(+-1) = 0`
//! with smooth closure at the poles. The crate provides:
//!
//! * [`profile`] — the [`Profile`](profile::Profile) container, arclength and
//!   geometric derivatives, curvature fields, CSV round-trips.
//! * [`frame`] — sectional / Ricci curvature evaluated in arbitrary
//!   orthonormal frames given the two curvature generators.
//! * [`solver`] — an explicit adaptive RK4 evolution of the flow
//!   `d g / dt = -2 Ric(g)` in this symmetry class, with invariant monitors.
//! * [`diagnostics`] — neck/bump feature detection, blow-up time fitting,
//!   singularity-type classification, and parabolic rescaling about a pivot.
//! * [`reduced`] — a discrete space-time reduced-distance functional.
//! * [`family`] — a one-parameter family of dumbbell initial data and a
//!   bisection driver locating the neckpinch threshold.
//! * [`soliton`] — gradient shrinking-soliton residuals, level-set volumes
//!   and intrinsic curvature of potential level sets.
//!
//! Everything is `f64`, deterministic, and free of global state: identical
//! inputs produce byte-identical outputs.

pub mod diagnostics;
pub mod error;
pub mod family;
pub mod frame;
pub mod profile;
pub mod reduced;
pub mod soliton;
pub mod solver;

pub use error::FlowError;
pub use profile::{BoundaryMode, CurvatureField, Profile};
pub use solver::{FlowRun, SolverConfig, Termination};
