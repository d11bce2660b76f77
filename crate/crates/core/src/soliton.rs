//! Shrinking-soliton identities and level-set geometry.
//!
//! A gradient shrinker at time `t < 0` satisfies, on a rotationally
//! symmetric warped product, the two scalar equations
//!
//! * radial:    `f_ss + n * K0 - 1/(2|t|) = 0`
//! * spherical: `f_s * psi_s * psi + psi^2 * (K0 + (n-1) K1) - psi^2 / (2|t|) = 0`
//!
//! where `f` is the potential and the spherical equation is written in
//! `g_can`-coefficient form (multiplied through by `psi^2`) so it stays
//! regular at the poles. This module evaluates those residuals for any
//! profile/potential pair, builds the two exact shrinkers (round sphere of
//! radius `sqrt(2n)`, cylinder of radius `sqrt(2(n-1))`, both at `t = -1`)
//! with analytic derivative data, computes round-sphere volumes of potential
//! level sets, and checks the Gauss-equation identity that a level set's
//! intrinsic curvature `1/psi^2` equals the ambient `K1` plus the squared
//! second fundamental form `(psi_s/psi)^2`.

use crate::error::FlowError;
use crate::profile::{round_sphere, BoundaryMode, CurvatureField, Profile};
use serde::{Deserialize, Serialize};

/// Potential function `f` with its first two arclength derivatives.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PotentialProfile {
    /// Values of `f` on the grid.
    pub f: Vec<f64>,
    /// `df/ds`.
    pub f_s: Vec<f64>,
    /// `d^2 f / ds^2`.
    pub f_ss: Vec<f64>,
}

impl PotentialProfile {
    /// Build from explicitly supplied derivative data (the analytic path).
    pub fn from_parts(f: Vec<f64>, f_s: Vec<f64>, f_ss: Vec<f64>) -> Result<Self, FlowError> {
        if f.len() != f_s.len() || f.len() != f_ss.len() {
            return Err(FlowError::InvalidInput(format!(
                "potential component lengths differ: {} / {} / {}",
                f.len(),
                f_s.len(),
                f_ss.len()
            )));
        }
        if f.iter().chain(&f_s).chain(&f_ss).any(|v| !v.is_finite()) {
            return Err(FlowError::InvalidInput("potential data must be finite".into()));
        }
        Ok(PotentialProfile { f, f_s, f_ss })
    }

    /// Build from sampled values of `f`, differentiating numerically (second
    /// order). In sphere mode `f` is reflected evenly at the poles, which is
    /// the parity a smooth rotationally symmetric function has there; other
    /// modes use one-sided ends.
    pub fn from_samples(p: &Profile, f: Vec<f64>) -> Result<Self, FlowError> {
        let m = p.len();
        if f.len() != m {
            return Err(FlowError::InvalidInput(format!(
                "potential has {} samples but the profile has {m}",
                f.len()
            )));
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(FlowError::InvalidInput("potential data must be finite".into()));
        }
        let dx = p.dx();
        let mut f_x = vec![0.0; m];
        match p.boundary {
            BoundaryMode::SpherePoles => {
                // Even ghosts: f(-h) = f(h), so f_x = 0 exactly at the poles.
                f_x[0] = 0.0;
                f_x[m - 1] = 0.0;
                for i in 1..m - 1 {
                    f_x[i] = (f[i + 1] - f[i - 1]) / (2.0 * dx);
                }
            }
            _ => {
                f_x[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * dx);
                f_x[m - 1] = (3.0 * f[m - 1] - 4.0 * f[m - 2] + f[m - 3]) / (2.0 * dx);
                for i in 1..m - 1 {
                    f_x[i] = (f[i + 1] - f[i - 1]) / (2.0 * dx);
                }
            }
        }
        let f_s: Vec<f64> = f_x.iter().zip(&p.phi).map(|(&fx, &ph)| fx / ph).collect();
        // Second derivative: d/ds of f_s, using the parity of f_s (odd at
        // the poles in sphere mode).
        let mut f_ss = vec![0.0; m];
        match p.boundary {
            BoundaryMode::SpherePoles => {
                f_ss[0] = f_s[1] / (dx * p.phi[0]);
                f_ss[m - 1] = -f_s[m - 2] / (dx * p.phi[m - 1]);
                for i in 1..m - 1 {
                    f_ss[i] = (f_s[i + 1] - f_s[i - 1]) / (2.0 * dx * p.phi[i]);
                }
            }
            _ => {
                f_ss[0] = (-3.0 * f_s[0] + 4.0 * f_s[1] - f_s[2]) / (2.0 * dx * p.phi[0]);
                f_ss[m - 1] =
                    (3.0 * f_s[m - 1] - 4.0 * f_s[m - 2] + f_s[m - 3]) / (2.0 * dx * p.phi[m - 1]);
                for i in 1..m - 1 {
                    f_ss[i] = (f_s[i + 1] - f_s[i - 1]) / (2.0 * dx * p.phi[i]);
                }
            }
        }
        Ok(PotentialProfile { f, f_s, f_ss })
    }
}

/// Pointwise shrinker residuals and their suprema.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolitonReport {
    /// Time of the profile (negative for a shrinker).
    pub t: f64,
    /// Radial residual `f_ss + n K0 - 1/(2|t|)` per grid point.
    pub radial: Vec<f64>,
    /// Spherical residual in coefficient form per grid point.
    pub spherical: Vec<f64>,
    /// `max |radial|`.
    pub sup_radial: f64,
    /// `max |spherical|`.
    pub sup_spherical: f64,
}

/// Evaluate the shrinker residuals of `(p, pot)` using the supplied
/// curvature data (pass `p.curvature()` for the discrete path or analytic
/// fields for exact solutions). Errors if `p.t >= 0`.
pub fn soliton_residual(
    p: &Profile,
    pot: &PotentialProfile,
    curv: &CurvatureField,
) -> Result<SolitonReport, FlowError> {
    if !(p.t < 0.0) {
        return Err(FlowError::InvalidInput(format!(
            "shrinker residuals need t < 0, got t = {}",
            p.t
        )));
    }
    let m = p.len();
    if pot.f.len() != m || curv.k0.len() != m {
        return Err(FlowError::InvalidInput(
            "profile, potential, and curvature sizes must match".into(),
        ));
    }
    let n = p.n as f64;
    let lam = 1.0 / (2.0 * p.t.abs());
    let mut radial = vec![0.0; m];
    let mut spherical = vec![0.0; m];
    let mut sup_r = 0.0_f64;
    let mut sup_s = 0.0_f64;
    for i in 0..m {
        let psi = p.psi[i];
        let r = pot.f_ss[i] + n * curv.k0[i] - lam;
        let s =
            pot.f_s[i] * curv.psi_s[i] * psi + psi * psi * (curv.k0[i] + (n - 1.0) * curv.k1[i] - lam);
        radial[i] = r;
        spherical[i] = s;
        sup_r = sup_r.max(r.abs());
        sup_s = sup_s.max(s.abs());
    }
    Ok(SolitonReport { t: p.t, radial, spherical, sup_radial: sup_r, sup_spherical: sup_s })
}

/// The round-sphere shrinker at `t = -1`: radius `sqrt(2n)`, `f = 0`.
/// Returns the sampled profile together with analytic potential and
/// curvature data.
pub fn shrinker_sphere(n: usize, n_grid: usize) -> (Profile, PotentialProfile, CurvatureField) {
    let r = (2.0 * n as f64).sqrt();
    let p = round_sphere(n, r, -1.0, n_grid);
    let m = p.len();
    let k = 1.0 / (r * r);
    let nf = n as f64;
    let curv = CurvatureField {
        psi_s: p.x.iter().map(|&x| -(std::f64::consts::FRAC_PI_2 * x).sin()).collect(),
        psi_ss: p.psi.iter().map(|&ps| -ps * k).collect(),
        k0: vec![k; m],
        k1: vec![k; m],
        ric_radial: vec![nf * k; m],
        ric_spherical: vec![nf * k; m],
        scalar: vec![nf * (nf + 1.0) * k; m],
        rm_norm: vec![k; m],
    };
    let pot = PotentialProfile { f: vec![0.0; m], f_s: vec![0.0; m], f_ss: vec![0.0; m] };
    (p, pot, curv)
}

/// The cylinder shrinker at `t = -1`: constant radius `sqrt(2(n-1))` over
/// `s in [-s_half, s_half]`, potential `f = s^2/4`. Returns sampled profile
/// with analytic potential and curvature data.
pub fn shrinker_cylinder(
    n: usize,
    s_half: f64,
    n_grid: usize,
) -> (Profile, PotentialProfile, CurvatureField) {
    let radius = (2.0 * (n as f64 - 1.0)).sqrt();
    let x: Vec<f64> = (0..n_grid)
        .map(|i| -1.0 + 2.0 * i as f64 / (n_grid as f64 - 1.0))
        .collect();
    let phi = vec![s_half; n_grid];
    let psi = vec![radius; n_grid];
    let p = Profile::new(n, -1.0, BoundaryMode::IntervalNeumann, x, phi, psi)
        .expect("valid cylinder");
    let m = p.len();
    let k1 = 1.0 / (radius * radius);
    let nf = n as f64;
    let s = p.arclength();
    let pot = PotentialProfile {
        f: s.iter().map(|&sv| 0.25 * sv * sv).collect(),
        f_s: s.iter().map(|&sv| 0.5 * sv).collect(),
        f_ss: vec![0.5; m],
    };
    let curv = CurvatureField {
        psi_s: vec![0.0; m],
        psi_ss: vec![0.0; m],
        k0: vec![0.0; m],
        k1: vec![k1; m],
        ric_radial: vec![0.0; m],
        ric_spherical: vec![(nf - 1.0) * k1; m],
        scalar: vec![nf * (nf - 1.0) * k1; m],
        rm_norm: vec![k1; m],
    };
    (p, pot, curv)
}

/// Volume of the unit round `S^n`: `2 pi^{(n+1)/2} / Gamma((n+1)/2)` in
/// closed form (factorials for odd `n`, half-integer Gamma for even `n`).
pub fn unit_sphere_volume(n: usize) -> f64 {
    use std::f64::consts::PI;
    if n % 2 == 1 {
        // (n+1)/2 = k integer: 2 pi^k / (k-1)!
        let k = (n + 1) / 2;
        let mut fact = 1.0;
        for j in 2..k {
            fact *= j as f64;
        }
        2.0 * PI.powi(k as i32) / fact
    } else {
        // n = 2m: 2 pi^m 4^m m! / (2m)!
        let m = n / 2;
        let mut num = 2.0 * PI.powi(m as i32) * 4.0_f64.powi(m as i32);
        for j in 2..=m {
            num *= j as f64;
        }
        let mut den = 1.0;
        for j in 2..=(2 * m) {
            den *= j as f64;
        }
        num / den
    }
}

/// One level set `{f = a}`: a round `S^n` of radius `psi` at the crossing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelSet {
    /// Grid interval index `i` with the crossing in `[x_i, x_{i+1}]`.
    pub index: usize,
    /// Interpolated coordinate of the crossing.
    pub x: f64,
    /// Interpolated arclength of the crossing.
    pub s: f64,
    /// Interpolated warped radius there.
    pub psi: f64,
    /// `omega_n * psi^n`.
    pub volume: f64,
}

/// Find every transversal crossing of `f = a` and return the round-sphere
/// volume of each level set. Errors with [`FlowError::CriticalLevel`] when a
/// crossing sits where `|f_s|` is negligible (the level set degenerates).
pub fn level_set_volume(
    p: &Profile,
    pot: &PotentialProfile,
    a: f64,
) -> Result<Vec<LevelSet>, FlowError> {
    let m = p.len();
    if pot.f.len() != m {
        return Err(FlowError::InvalidInput("potential/profile size mismatch".into()));
    }
    let omega = unit_sphere_volume(p.n);
    let s = p.arclength();
    let fs_scale = pot.f_s.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())).max(1.0);
    let mut out = Vec::new();
    let mut i = 0;
    while i + 1 < m {
        let d0 = pot.f[i] - a;
        let d1 = pot.f[i + 1] - a;
        if d0 == 0.0 && d1 == 0.0 {
            // Plateau exactly at the level: degenerate.
            return Err(FlowError::CriticalLevel { s: s[i], f_s_abs: 0.0 });
        }
        if d0 * d1 <= 0.0 && !(d0 != 0.0 && d1 == 0.0) {
            // Crossing in [i, i+1] (attribute exact hits to the left node).
            // Refine interior crossings with the quadratic through three
            // neighboring nodes: exact for locally quadratic potentials,
            // O(dx^3) in general, versus O(dx^2) for the secant alone.
            let (j0, xi) = if d0 == 0.0 {
                (i, 0.0)
            } else {
                let j0 = if i == 0 { 0 } else { i - 1 };
                let off = (i - j0) as f64;
                let lin = off + d0 / (d0 - d1);
                let g0 = pot.f[j0] - a;
                let g1 = pot.f[j0 + 1] - a;
                let g2 = pot.f[j0 + 2] - a;
                let c2 = 0.5 * (g0 - 2.0 * g1 + g2);
                let c1 = (g1 - g0) - c2;
                let gs = g0.abs().max(g1.abs()).max(g2.abs());
                let root = if c2.abs() <= 1e-12 * gs.max(c1.abs()) {
                    None
                } else {
                    let disc = c1 * c1 - 4.0 * c2 * g0;
                    if disc < 0.0 {
                        None
                    } else {
                        let q = -0.5 * (c1 + c1.signum() * disc.sqrt());
                        let cands = if q == 0.0 { [0.0, 0.0] } else { [q / c2, g0 / q] };
                        let inside = |r: f64| r >= off - 1e-9 && r <= off + 1.0 + 1e-9;
                        match (inside(cands[0]), inside(cands[1])) {
                            (true, true) => Some(if (cands[0] - lin).abs() <= (cands[1] - lin).abs() {
                                cands[0]
                            } else {
                                cands[1]
                            }),
                            (true, false) => Some(cands[0]),
                            (false, true) => Some(cands[1]),
                            (false, false) => None,
                        }
                    }
                };
                (j0, root.unwrap_or(lin).clamp(off, off + 1.0))
            };
            // Quadratic interpolation of the located fields on the same
            // stencil (degenerates to the node value at an exact hit).
            let interp = |arr: &[f64]| -> f64 {
                if j0 + 2 >= m {
                    return arr[j0];
                }
                let d01 = arr[j0 + 1] - arr[j0];
                let half_d2 = 0.5 * (arr[j0 + 2] - 2.0 * arr[j0 + 1] + arr[j0]);
                arr[j0] + d01 * xi + half_d2 * xi * (xi - 1.0)
            };
            let xa = interp(&p.x);
            let sa = interp(&s);
            let psia = interp(&p.psi);
            let fsa = interp(&pot.f_s);
            if fsa.abs() < 1e-8 * fs_scale {
                return Err(FlowError::CriticalLevel { s: sa, f_s_abs: fsa.abs() });
            }
            out.push(LevelSet {
                index: i,
                x: xa,
                s: sa,
                psi: psia,
                volume: omega * psia.powi(p.n as i32),
            });
            // Skip the partner interval of an exact nodal hit.
            if d1 == 0.0 {
                i += 1;
            }
        }
        i += 1;
    }
    Ok(out)
}

/// Both sides of the Gauss-equation identity for the slice through grid
/// point `i`: the intrinsic sectional curvature of `{s = s_i}` computed from
/// ambient data (`K1 + (psi_s/psi)^2`) and the exact round-sphere value
/// (`1/psi^2`). They agree to rounding for any profile.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SliceCurvature {
    /// `K1 + (psi_s/psi)^2`.
    pub via_gauss: f64,
    /// `1 / psi^2`.
    pub exact: f64,
}

/// Evaluate [`SliceCurvature`] at interior grid point `i`.
pub fn slice_intrinsic_curvature(
    p: &Profile,
    curv: &CurvatureField,
    i: usize,
) -> Result<SliceCurvature, FlowError> {
    if i == 0 || i + 1 >= p.len() {
        return Err(FlowError::InvalidInput(
            "slice curvature is defined at interior points only".into(),
        ));
    }
    let psi = p.psi[i];
    if psi <= 0.0 {
        return Err(FlowError::InvalidInput(format!("slice at i = {i} has psi = {psi}")));
    }
    let w = curv.psi_s[i];
    Ok(SliceCurvature { via_gauss: curv.k1[i] + (w / psi) * (w / psi), exact: 1.0 / (psi * psi) })
}
