//! Warped-product profiles and their intrinsic geometry.
//!
//! A rotationally symmetric metric on `[-1, 1] x S^n` is stored as sampled
//! warping functions on a uniform grid in `x`:
//!
//! ```text
//! g = phi(x)^2 dx^2 + psi(x)^2 g_can .
//! ```
//!
//! Geometric arclength is `s(x) = integral_0^x phi`, so `d/ds = (1/phi) d/dx`.
//! All curvatures of such a metric are generated by two sectional values:
//!
//! ```text
//! k0 = -psi_ss / psi          (planes containing the radial direction),
//! k1 = (1 - psi_s^2) / psi^2  (planes tangent to the S^n fibre),
//! ```
//!
//! with Ricci eigenvalues `n*k0` (radial) and `k0 + (n-1)*k1` (spherical),
//! scalar curvature `2n*k0 + n(n-1)*k1`, and pointwise curvature magnitude
//! `max(|k0|, |k1|)`.
//!
//! Three boundary regimes are supported, see [`BoundaryMode`]. For closed
//! spheres the poles sit at `x = +-1` where `psi = 0`; smooth closure means
//! `psi` extends as an odd function and `phi` as an even function across each
//! pole, with `|psi_s| -> 1` there. The derivative kernels exploit exactly
//! that reflection structure, so pole neighbourhoods lose no accuracy.

use crate::error::FlowError;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

/// How the ends of the `x` interval are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    /// Closed sphere `S^{n+1}`: `psi(+-1) = 0`, smooth closure at both poles.
    SpherePoles,
    /// Periodic identification of the ends (a twisted product over a circle):
    /// the two endpoint samples are the same geometric point and must carry
    /// equal values.
    IntervalPeriodic,
    /// Free interval ends: the profile simply stops at the walls and
    /// derivatives there are taken one-sidedly. Useful for cylinder and
    /// cone segments whose wall slope is arbitrary.
    IntervalNeumann,
}

impl BoundaryMode {
    /// Token used in CSV metadata and configuration files.
    pub fn token(self) -> &'static str {
        match self {
            BoundaryMode::SpherePoles => "sphere_poles",
            BoundaryMode::IntervalPeriodic => "interval_periodic",
            BoundaryMode::IntervalNeumann => "interval_neumann",
        }
    }

    /// Inverse of [`token`](Self::token).
    pub fn from_token(tok: &str) -> Result<Self, FlowError> {
        match tok {
            "sphere_poles" => Ok(BoundaryMode::SpherePoles),
            "interval_periodic" => Ok(BoundaryMode::IntervalPeriodic),
            "interval_neumann" => Ok(BoundaryMode::IntervalNeumann),
            other => Err(FlowError::InvalidInput(format!("unknown boundary mode `{other}`"))),
        }
    }
}

/// A sampled warped-product metric at one instant of flow time.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    /// Fibre dimension: the manifold is `[-1,1] x S^n` (or `S^{n+1}` closed).
    pub n: usize,
    /// Flow time this sample belongs to (units of length squared).
    pub t: f64,
    /// End-of-interval interpretation.
    pub boundary: BoundaryMode,
    /// Uniform grid, strictly increasing, `x[0] = -1`, `x[last] = 1`.
    pub x: Vec<f64>,
    /// Radial warping, `phi > 0` everywhere.
    pub phi: Vec<f64>,
    /// Spherical warping, `psi > 0` in the interior; `psi = 0` exactly at
    /// poles in [`BoundaryMode::SpherePoles`].
    pub psi: Vec<f64>,
}

/// Pointwise curvature data derived from a [`Profile`].
#[derive(Debug, Clone)]
pub struct CurvatureField {
    /// `d psi / d s`.
    pub psi_s: Vec<f64>,
    /// `d^2 psi / d s^2`.
    pub psi_ss: Vec<f64>,
    /// Sectional curvature of planes containing the radial direction.
    pub k0: Vec<f64>,
    /// Sectional curvature of planes tangent to the sphere fibre.
    pub k1: Vec<f64>,
    /// Ricci eigenvalue in the radial direction, `n * k0`.
    pub ric_radial: Vec<f64>,
    /// Ricci eigenvalue in any spherical direction, `k0 + (n-1) * k1`.
    pub ric_spherical: Vec<f64>,
    /// Scalar curvature `2n*k0 + n(n-1)*k1`.
    pub scalar: Vec<f64>,
    /// Pointwise curvature magnitude `max(|k0|, |k1|)`.
    pub rm_norm: Vec<f64>,
}

impl CurvatureField {
    /// Largest pointwise curvature magnitude and the index attaining it.
    pub fn max_rm(&self) -> (f64, usize) {
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0;
        for (i, &v) in self.rm_norm.iter().enumerate() {
            if v > best {
                best = v;
                arg = i;
            }
        }
        (best, arg)
    }
}

/// Relative tolerance used when snapping noisy boundary samples (pole zeros,
/// periodic seams) onto their exact values.
const SNAP_REL: f64 = 1e-12;

impl Profile {
    /// Validate raw samples and build a profile.
    ///
    /// Checks: `n >= 2`; at least 5 grid points; `x` uniform from -1 to 1;
    /// `phi > 0`; `psi > 0` in the interior; mode-specific end conditions.
    /// Pole values of `psi` within `1e-12 * max(psi)` of zero are snapped to
    /// exact zero; periodic seams are snapped to the left value.
    pub fn new(
        n: usize,
        t: f64,
        boundary: BoundaryMode,
        x: Vec<f64>,
        phi: Vec<f64>,
        mut psi: Vec<f64>,
    ) -> Result<Self, FlowError> {
        if n < 2 {
            return Err(FlowError::InvalidInput(format!("fibre dimension n = {n}, need n >= 2")));
        }
        let m = x.len();
        if m < 5 {
            return Err(FlowError::InvalidInput(format!("grid has {m} points, need at least 5")));
        }
        if phi.len() != m || psi.len() != m {
            return Err(FlowError::InvalidInput(format!(
                "array lengths differ: x = {m}, phi = {}, psi = {}",
                phi.len(),
                psi.len()
            )));
        }
        if !t.is_finite() {
            return Err(FlowError::InvalidInput(format!("time t = {t} is not finite")));
        }
        let dx = 2.0 / (m as f64 - 1.0);
        if (x[0] + 1.0).abs() > 1e-9 * dx || (x[m - 1] - 1.0).abs() > 1e-9 * dx {
            return Err(FlowError::InvalidInput(format!(
                "x must span [-1, 1]; got [{}, {}]",
                x[0],
                x[m - 1]
            )));
        }
        for i in 0..m {
            let expect = -1.0 + i as f64 * dx;
            if (x[i] - expect).abs() > 1e-9 * dx {
                return Err(FlowError::InvalidInput(format!(
                    "x grid not uniform at index {i}: got {}, expected {expect}",
                    x[i]
                )));
            }
            if !phi[i].is_finite() || phi[i] <= 0.0 {
                return Err(FlowError::InvalidInput(format!(
                    "phi must be positive and finite; phi[{i}] = {}",
                    phi[i]
                )));
            }
            if !psi[i].is_finite() {
                return Err(FlowError::InvalidInput(format!("psi[{i}] = {} is not finite", psi[i])));
            }
        }
        let psi_max = psi.iter().cloned().fold(0.0_f64, f64::max);
        if psi_max <= 0.0 {
            return Err(FlowError::InvalidInput("psi is nonpositive everywhere".into()));
        }
        let snap = SNAP_REL * psi_max;
        match boundary {
            BoundaryMode::SpherePoles => {
                for &end in &[0, m - 1] {
                    if psi[end].abs() > snap {
                        return Err(FlowError::InvalidInput(format!(
                            "sphere profile needs psi = 0 at x = {}; got {}",
                            x[end], psi[end]
                        )));
                    }
                    psi[end] = 0.0;
                }
                for i in 1..m - 1 {
                    if psi[i] <= 0.0 {
                        return Err(FlowError::InvalidInput(format!(
                            "interior psi must be positive; psi[{i}] = {}",
                            psi[i]
                        )));
                    }
                }
            }
            BoundaryMode::IntervalPeriodic => {
                if (psi[0] - psi[m - 1]).abs() > snap
                    || (phi[0] - phi[m - 1]).abs() > SNAP_REL * phi[0].abs()
                {
                    return Err(FlowError::InvalidInput(
                        "periodic profile needs matching values at the two ends".into(),
                    ));
                }
                psi[m - 1] = psi[0];
                for (i, &v) in psi.iter().enumerate() {
                    if v <= 0.0 {
                        return Err(FlowError::InvalidInput(format!(
                            "psi must be positive; psi[{i}] = {v}"
                        )));
                    }
                }
            }
            BoundaryMode::IntervalNeumann => {
                for (i, &v) in psi.iter().enumerate() {
                    if v <= 0.0 {
                        return Err(FlowError::InvalidInput(format!(
                            "psi must be positive; psi[{i}] = {v}"
                        )));
                    }
                }
            }
        }
        Ok(Profile { n, t, boundary, x, phi, psi })
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        self.x.len()
    }

    /// True when the grid is empty (never, for a validated profile).
    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Uniform grid spacing in `x`.
    pub fn dx(&self) -> f64 {
        2.0 / (self.len() as f64 - 1.0)
    }

    /// Largest value of `psi`.
    pub fn psi_max(&self) -> f64 {
        self.psi.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Geometric arclength `s(x) = integral_0^x phi` at every grid point
    /// (trapezoid rule), zeroed at `x = 0` (interpolated when `x = 0` falls
    /// between grid points).
    pub fn arclength(&self) -> Vec<f64> {
        let m = self.len();
        let dx = self.dx();
        let mut s = vec![0.0; m];
        for i in 1..m {
            s[i] = s[i - 1] + 0.5 * dx * (self.phi[i - 1] + self.phi[i]);
        }
        // Shift so that s = 0 at x = 0.
        let pos = (self.len() - 1) as f64 / 2.0;
        let i0 = pos.floor() as usize;
        let frac = pos - i0 as f64;
        let s0 = if frac == 0.0 { s[i0] } else { s[i0] * (1.0 - frac) + s[i0 + 1] * frac };
        for v in &mut s {
            *v -= s0;
        }
        s
    }

    /// Total geometric length of the interval, `integral_{-1}^{1} phi`.
    pub fn total_length(&self) -> f64 {
        let s = self.arclength();
        s[self.len() - 1] - s[0]
    }

    /// First and second arclength derivatives of `psi` with the documented
    /// generic endpoint treatment: second-order central differences in the
    /// interior and one-sided second-order stencils at the two ends
    /// (periodic profiles wrap instead). Returns `(psi_s, psi_ss)`.
    ///
    /// This is the plain-data operation; curvature and the flow solver use
    /// the closure-aware kernel which is exact about sphere poles.
    pub fn derivatives_s(&self) -> (Vec<f64>, Vec<f64>) {
        let m = self.len();
        let dx = self.dx();
        let mut w = vec![0.0; m];
        match self.boundary {
            BoundaryMode::IntervalPeriodic => {
                diff_periodic(&self.psi, dx, &mut w);
            }
            _ => {
                diff_one_sided(&self.psi, dx, &mut w);
            }
        }
        for i in 0..m {
            w[i] /= self.phi[i];
        }
        let mut wx = vec![0.0; m];
        match self.boundary {
            BoundaryMode::IntervalPeriodic => diff_periodic(&w, dx, &mut wx),
            _ => diff_one_sided(&w, dx, &mut wx),
        }
        for i in 0..m {
            wx[i] /= self.phi[i];
        }
        (w, wx)
    }

    /// Closure-aware arclength derivatives of `psi`: `(psi_s, psi_ss)`.
    ///
    /// Sphere mode reflects across the poles (`psi` odd, `psi_s` even) and
    /// uses fourth-order first-derivative stencils throughout, which keeps
    /// the relative accuracy of `1 - psi_s^2` uniform down to the poles;
    /// `psi_ss` at a pole is exactly zero by symmetry. Interval mode uses
    /// one-sided end stencils; periodic mode wraps.
    pub fn geometric_derivatives(&self) -> (Vec<f64>, Vec<f64>) {
        let m = self.len();
        let mut w = vec![0.0; m];
        let mut wx = vec![0.0; m];
        geometric_derivatives_into(
            self.boundary,
            &self.psi,
            &self.phi,
            self.dx(),
            &mut w,
            &mut wx,
        );
        (w, wx)
    }

    /// Full curvature data for this profile.
    ///
    /// At sphere poles `k0` is filled by quadratic extrapolation from the
    /// three neighbouring interior values and `k1` is set equal to `k0`
    /// there (the two limits agree under smooth closure).
    pub fn curvature(&self) -> CurvatureField {
        let m = self.len();
        let nf = self.n as f64;
        let (psi_s, psi_ss) = self.geometric_derivatives();
        let mut k0 = vec![0.0; m];
        let mut k1 = vec![0.0; m];
        let interior = match self.boundary {
            BoundaryMode::SpherePoles => 1..m - 1,
            _ => 0..m,
        };
        for i in interior {
            k0[i] = -psi_ss[i] / self.psi[i];
            k1[i] = (1.0 - psi_s[i] * psi_s[i]) / (self.psi[i] * self.psi[i]);
        }
        if self.boundary == BoundaryMode::SpherePoles {
            k0[0] = 3.0 * k0[1] - 3.0 * k0[2] + k0[3];
            k1[0] = k0[0];
            k0[m - 1] = 3.0 * k0[m - 2] - 3.0 * k0[m - 3] + k0[m - 4];
            k1[m - 1] = k0[m - 1];
        }
        let mut ric_radial = vec![0.0; m];
        let mut ric_spherical = vec![0.0; m];
        let mut scalar = vec![0.0; m];
        let mut rm_norm = vec![0.0; m];
        for i in 0..m {
            ric_radial[i] = nf * k0[i];
            ric_spherical[i] = k0[i] + (nf - 1.0) * k1[i];
            scalar[i] = 2.0 * nf * k0[i] + nf * (nf - 1.0) * k1[i];
            rm_norm[i] = k0[i].abs().max(k1[i].abs());
        }
        CurvatureField { psi_s, psi_ss, k0, k1, ric_radial, ric_spherical, scalar, rm_norm }
    }

    /// The same metric with all lengths multiplied by `lambda` (so the
    /// metric tensor is multiplied by `lambda^2`) and time rescaled
    /// parabolically, `t -> lambda^2 t`.
    pub fn scaled(&self, lambda: f64) -> Profile {
        assert!(lambda > 0.0 && lambda.is_finite(), "scale factor must be positive");
        Profile {
            n: self.n,
            t: self.t * lambda * lambda,
            boundary: self.boundary,
            x: self.x.clone(),
            phi: self.phi.iter().map(|v| v * lambda).collect(),
            psi: self.psi.iter().map(|v| v * lambda).collect(),
        }
    }

    /// Serialize to the laboratory CSV format: `#`-prefixed metadata lines
    /// (`n`, `t`, `mode`), a header row, then one `x,phi,psi` row per grid
    /// point with 17 significant digits (bit-faithful round trip).
    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(64 * self.len());
        let _ = writeln!(out, "# n={}", self.n);
        let _ = writeln!(out, "# t={:.16e}", self.t);
        let _ = writeln!(out, "# mode={}", self.boundary.token());
        out.push_str("x,phi,psi\n");
        for i in 0..self.len() {
            let _ = writeln!(out, "{:.16e},{:.16e},{:.16e}", self.x[i], self.phi[i], self.psi[i]);
        }
        out
    }

    /// Parse the laboratory CSV format produced by
    /// [`to_csv_string`](Self::to_csv_string).
    pub fn from_csv_str(text: &str) -> Result<Profile, FlowError> {
        let mut n: Option<usize> = None;
        let mut t: Option<f64> = None;
        let mut mode: Option<BoundaryMode> = None;
        let mut header_seen = false;
        let mut x = Vec::new();
        let mut phi = Vec::new();
        let mut psi = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                let meta = meta.trim();
                if let Some((key, value)) = meta.split_once('=') {
                    match key.trim() {
                        "n" => {
                            n = Some(value.trim().parse().map_err(|_| {
                                FlowError::InvalidInput(format!(
                                    "line {}: bad n `{}`",
                                    lineno + 1,
                                    value
                                ))
                            })?)
                        }
                        "t" => {
                            t = Some(value.trim().parse().map_err(|_| {
                                FlowError::InvalidInput(format!(
                                    "line {}: bad t `{}`",
                                    lineno + 1,
                                    value
                                ))
                            })?)
                        }
                        "mode" => mode = Some(BoundaryMode::from_token(value.trim())?),
                        _ => {} // Unknown metadata is carried but ignored.
                    }
                }
                continue;
            }
            if !header_seen {
                let cols: Vec<&str> = line.split(',').map(str::trim).collect();
                if cols != ["x", "phi", "psi"] {
                    return Err(FlowError::InvalidInput(format!(
                        "line {}: expected header `x,phi,psi`, got `{line}`",
                        lineno + 1
                    )));
                }
                header_seen = true;
                continue;
            }
            let mut vals = [0.0_f64; 3];
            let mut count = 0;
            for (k, field) in line.split(',').enumerate() {
                if k >= 3 {
                    return Err(FlowError::InvalidInput(format!(
                        "line {}: too many columns",
                        lineno + 1
                    )));
                }
                vals[k] = field.trim().parse().map_err(|_| {
                    FlowError::InvalidInput(format!(
                        "line {}: bad number `{}`",
                        lineno + 1,
                        field.trim()
                    ))
                })?;
                count = k + 1;
            }
            if count != 3 {
                return Err(FlowError::InvalidInput(format!(
                    "line {}: expected 3 columns, got {count}",
                    lineno + 1
                )));
            }
            x.push(vals[0]);
            phi.push(vals[1]);
            psi.push(vals[2]);
        }
        let n = n.ok_or_else(|| FlowError::InvalidInput("missing `# n=` metadata".into()))?;
        let t = t.ok_or_else(|| FlowError::InvalidInput("missing `# t=` metadata".into()))?;
        let mode =
            mode.ok_or_else(|| FlowError::InvalidInput("missing `# mode=` metadata".into()))?;
        Profile::new(n, t, mode, x, phi, psi)
    }

    /// Write the CSV serialization to a file.
    pub fn write_csv_file(&self, path: &Path) -> Result<(), FlowError> {
        std::fs::write(path, self.to_csv_string())
            .map_err(|e| FlowError::io(path.display().to_string(), e))
    }

    /// Read a profile from a CSV file.
    pub fn read_csv_file(path: &Path) -> Result<Profile, FlowError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| FlowError::io(path.display().to_string(), e))?;
        Profile::from_csv_str(&text)
    }

    /// Verify smooth closure at the poles: `psi(+-1) = 0` (structural) and
    /// one-sided `|psi_s| -> 1` within `tol`. Only meaningful for
    /// [`BoundaryMode::SpherePoles`]; other modes pass trivially.
    pub fn check_closure(&self, tol: f64) -> Result<(), FlowError> {
        if self.boundary != BoundaryMode::SpherePoles {
            return Ok(());
        }
        let m = self.len();
        let dx = self.dx();
        // One-sided second-order slopes at the two poles.
        let left = (-3.0 * self.psi[0] + 4.0 * self.psi[1] - self.psi[2]) / (2.0 * dx * self.phi[0]);
        let right = (3.0 * self.psi[m - 1] - 4.0 * self.psi[m - 2] + self.psi[m - 3])
            / (2.0 * dx * self.phi[m - 1]);
        if (left - 1.0).abs() > tol {
            return Err(FlowError::ConstraintViolation {
                condition: "smooth closure at left pole".into(),
                detail: format!("one-sided psi_s = {left:.8}, expected +1 within {tol:.2e}"),
            });
        }
        if (right + 1.0).abs() > tol {
            return Err(FlowError::ConstraintViolation {
                condition: "smooth closure at right pole".into(),
                detail: format!("one-sided psi_s = {right:.8}, expected -1 within {tol:.2e}"),
            });
        }
        Ok(())
    }
}

/// Round sphere of the given radius as a closed profile: `psi = r cos(pi x/2)`,
/// `phi = r pi / 2`, so arclength runs over `[-r pi/2, r pi/2]` and both
/// sectional curvatures equal `1/r^2`.
pub fn round_sphere(n: usize, radius: f64, t: f64, n_grid: usize) -> Profile {
    assert!(radius > 0.0);
    let x: Vec<f64> = (0..n_grid).map(|i| -1.0 + 2.0 * i as f64 / (n_grid as f64 - 1.0)).collect();
    let phi = vec![radius * std::f64::consts::FRAC_PI_2; n_grid];
    let psi: Vec<f64> =
        x.iter().map(|&xi| radius * (std::f64::consts::FRAC_PI_2 * xi).cos()).collect();
    Profile::new(n, t, BoundaryMode::SpherePoles, x, phi, psi)
        .expect("round sphere construction is always valid")
}

/// Round cylinder `[-1,1] x S^n` with constant `psi = radius`, `phi = 1`.
pub fn round_cylinder(
    n: usize,
    radius: f64,
    t: f64,
    n_grid: usize,
    boundary: BoundaryMode,
) -> Profile {
    assert!(radius > 0.0);
    assert!(boundary != BoundaryMode::SpherePoles, "a cylinder has no poles");
    let x: Vec<f64> = (0..n_grid).map(|i| -1.0 + 2.0 * i as f64 / (n_grid as f64 - 1.0)).collect();
    Profile::new(n, t, boundary, x, vec![1.0; n_grid], vec![radius; n_grid])
        .expect("round cylinder construction is always valid")
}

/// Flat cone slice `psi = s + offset` (unit slope in arclength), `phi = 1`,
/// reflecting ends. Both sectional curvature generators vanish identically,
/// so this is a flat test profile.
pub fn flat_cone(n: usize, offset: f64, t: f64, n_grid: usize) -> Profile {
    let x: Vec<f64> = (0..n_grid).map(|i| -1.0 + 2.0 * i as f64 / (n_grid as f64 - 1.0)).collect();
    let psi: Vec<f64> = x.iter().map(|&xi| xi + offset).collect();
    assert!(psi[0] > 0.0, "offset must exceed 1 so psi stays positive");
    Profile::new(n, t, BoundaryMode::IntervalNeumann, x, vec![1.0; n_grid], psi)
        .expect("flat cone construction is always valid")
}

// ---------------------------------------------------------------------------
// Derivative kernels (plain x-derivatives; callers divide by phi).
// ---------------------------------------------------------------------------

/// Second-order central differences inside, one-sided second-order at ends.
fn diff_one_sided(f: &[f64], dx: f64, out: &mut [f64]) {
    let m = f.len();
    debug_assert!(m >= 4 && out.len() == m);
    // Four-point end stencils whose truncation term (+dx^2/6 f''') matches
    // the interior central stencil; with a uniform leading error the second
    // application stays second-order all the way to the ends.
    out[0] = (-4.0 * f[0] + 7.0 * f[1] - 4.0 * f[2] + f[3]) / (2.0 * dx);
    for i in 1..m - 1 {
        out[i] = (f[i + 1] - f[i - 1]) / (2.0 * dx);
    }
    out[m - 1] = (4.0 * f[m - 1] - 7.0 * f[m - 2] + 4.0 * f[m - 3] - f[m - 4]) / (2.0 * dx);
}

/// Second-order central differences with periodic wrap; the duplicated end
/// sample receives the same value as the first.
fn diff_periodic(f: &[f64], dx: f64, out: &mut [f64]) {
    let m = f.len();
    debug_assert!(m >= 4 && out.len() == m);
    let p = m - 1; // period in samples; f[p] duplicates f[0]
    out[0] = (f[1] - f[p - 1]) / (2.0 * dx);
    for i in 1..p {
        let prev = f[i - 1];
        let next = if i + 1 == p { f[0] } else { f[i + 1] };
        out[i] = (next - prev) / (2.0 * dx);
    }
    out[p] = out[0];
}

/// Closure-aware derivative kernel common to curvature evaluation and the
/// flow solver. Fills `psi_s` and `psi_ss` (both in arclength).
///
/// Sphere mode: `psi` continues oddly across each pole (ghost `psi[-k] =
/// -psi[k]`), which closes the fourth-order stencils beside the poles
/// without accuracy loss; the pole slopes themselves are pinned to the
/// smooth-closure values `+1` / `-1`, and `psi_s` continues evenly, which
/// makes `psi_ss` vanish identically at the poles.
pub(crate) fn geometric_derivatives_into(
    boundary: BoundaryMode,
    psi: &[f64],
    phi: &[f64],
    dx: f64,
    psi_s: &mut [f64],
    psi_ss: &mut [f64],
) {
    let m = psi.len();
    debug_assert!(m >= 5);
    debug_assert!(phi.len() == m && psi_s.len() == m && psi_ss.len() == m);
    match boundary {
        BoundaryMode::SpherePoles => {
            // First derivative of psi in x, written into psi_s.
            // Fourth-order stencils with odd reflection near the poles
            // (psi[0] = psi[m-1] = 0 exactly).
            psi_s[1] = (-psi[3] + 8.0 * psi[2] - psi[1]) / (12.0 * dx);
            psi_s[2] = (-psi[4] + 8.0 * psi[3] - 8.0 * psi[1]) / (12.0 * dx);
            // Fourth order in the whole interior: a second-order first
            // derivative would cap the *relative* accuracy of 1 - psi_s^2
            // near a pole at 1/(3 j^2) independent of dx (psi_s -> 1 there),
            // and its O(dx^2) absolute error would leak an O(1/j) relative
            // error into k0 beside the fourth-order pole zone.
            for i in 3..m - 3 {
                psi_s[i] =
                    (psi[i - 2] - 8.0 * psi[i - 1] + 8.0 * psi[i + 1] - psi[i + 2]) / (12.0 * dx);
            }
            psi_s[m - 3] = (psi[m - 5] - 8.0 * psi[m - 4] + 8.0 * psi[m - 2]) / (12.0 * dx);
            psi_s[m - 2] = (psi[m - 4] - 8.0 * psi[m - 3] + psi[m - 2]) / (12.0 * dx);
            for i in 1..m - 1 {
                psi_s[i] /= phi[i];
            }
            // Pole slopes are the smooth-closure values, which this mode
            // asserts by definition. Reading them from psi_x[pole] / phi[pole]
            // instead would close a positive feedback loop through the pole
            // lapse: a lapse error perturbs the measured slope, hence
            // psi_ss beside the pole, hence the extrapolated psi_ss/psi
            // ratio that drives the pole lapse, with gain ~ 1/(dx^2 psi[1])
            // -- an instability observed to destroy a round-sphere run in a
            // few dozen steps. Actual closure drift is monitored separately
            // from raw one-sided ratios.
            psi_s[0] = 1.0;
            psi_s[m - 1] = -1.0;
            // Second derivative: differentiate psi_s, which is even across
            // poles (ghost w[-1] = w[1]), making the pole value exactly 0.
            psi_ss[0] = 0.0;
            for i in 1..m - 1 {
                psi_ss[i] = (psi_s[i + 1] - psi_s[i - 1]) / (2.0 * dx * phi[i]);
            }
            psi_ss[m - 1] = 0.0;
        }
        BoundaryMode::IntervalPeriodic => {
            diff_periodic(psi, dx, psi_s);
            for i in 0..m {
                psi_s[i] /= phi[i];
            }
            diff_periodic(psi_s, dx, psi_ss);
            for i in 0..m {
                psi_ss[i] /= phi[i];
            }
        }
        BoundaryMode::IntervalNeumann => {
            // Free interval ends: derivatives are extrapolated one-sidedly
            // rather than reflected, so wall slopes are honoured (a cone
            // piece with psi_s = 1 at the wall stays flat, for instance).
            diff_one_sided(psi, dx, psi_s);
            for i in 0..m {
                psi_s[i] /= phi[i];
            }
            diff_one_sided(psi_s, dx, psi_ss);
            for i in 0..m {
                psi_ss[i] /= phi[i];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arclength_quadratic_phi() {
        // phi = 1 + x^2: s(1) = 4/3, s(-1) = -4/3, total length 8/3.
        let n_grid = 2001;
        let x: Vec<f64> =
            (0..n_grid).map(|i| -1.0 + 2.0 * i as f64 / (n_grid as f64 - 1.0)).collect();
        let phi: Vec<f64> = x.iter().map(|&v| 1.0 + v * v).collect();
        let psi: Vec<f64> = x.iter().map(|&v| 2.0 + (v * 1.3).sin() * 0.3).collect();
        let p = Profile::new(2, 0.0, BoundaryMode::IntervalNeumann, x, phi, psi).unwrap();
        let s = p.arclength();
        let m = p.len();
        assert!((s[m - 1] - 4.0 / 3.0).abs() < 2e-7, "s(1) = {}", s[m - 1]);
        assert!((s[0] + 4.0 / 3.0).abs() < 2e-7, "s(-1) = {}", s[0]);
        assert!((p.total_length() - 8.0 / 3.0).abs() < 4e-7);
        // s = 0 at x = 0 (odd grid => exact grid point).
        assert_eq!(s[(m - 1) / 2], 0.0);
    }

    #[test]
    fn derivative_contract_on_sine() {
        // psi = sin(pi (x+1)/2) over phi = pi/2 gives psi(s) = sin(s) on
        // [0, pi]; both derivative operations must be second-order accurate.
        let mut errs = Vec::new();
        for &m in &[101usize, 201, 401] {
            let x: Vec<f64> = (0..m).map(|i| -1.0 + 2.0 * i as f64 / (m as f64 - 1.0)).collect();
            let phi = vec![std::f64::consts::FRAC_PI_2; m];
            let psi: Vec<f64> = x
                .iter()
                .map(|&v| (std::f64::consts::FRAC_PI_2 * (v + 1.0)).sin())
                .collect();
            let p = Profile::new(2, 0.0, BoundaryMode::SpherePoles, x, phi, psi).unwrap();
            let s = p.arclength();
            let (ds, dss) = p.derivatives_s();
            let mut worst = 0.0_f64;
            for i in 0..m {
                let strue = s[i] + std::f64::consts::FRAC_PI_2; // s zeroed at x=0
                worst = worst.max((ds[i] - strue.cos()).abs());
                worst = worst.max((dss[i] + strue.sin()).abs());
            }
            errs.push(worst);
        }
        // Halving dx four times over should shrink the error ~4x each step.
        assert!(errs[1] < errs[0] / 3.0, "{errs:?}");
        assert!(errs[2] < errs[1] / 3.0, "{errs:?}");
        assert!(errs[0] < 5e-3, "{errs:?}");
    }

    #[test]
    fn sphere_curvature_is_constant() {
        for &r in &[1.0, 0.5, 2.0] {
            let p = round_sphere(2, r, 0.0, 201);
            let c = p.curvature();
            let kexp = 1.0 / (r * r);
            for i in 0..p.len() {
                assert!(
                    (c.k0[i] - kexp).abs() < 2e-4 * kexp,
                    "k0[{i}] = {} vs {kexp} (r = {r})",
                    c.k0[i]
                );
                assert!(
                    (c.k1[i] - kexp).abs() < 2e-4 * kexp,
                    "k1[{i}] = {} vs {kexp} (r = {r})",
                    c.k1[i]
                );
            }
            // Scalar curvature of the round S^3 of radius r: 6 / r^2.
            let rexp = 6.0 / (r * r);
            assert!((c.scalar[100] - rexp).abs() < 1e-3 * rexp);
        }
    }

    #[test]
    fn cylinder_curvature_split() {
        // psi = 1, phi = 1: k0 = 0, k1 = 1, scalar = n(n-1).
        for &n in &[2usize, 3, 4] {
            let p = round_cylinder(n, 1.0, 0.0, 101, BoundaryMode::IntervalPeriodic);
            let c = p.curvature();
            for i in 0..p.len() {
                assert!(c.k0[i].abs() < 1e-14);
                assert!((c.k1[i] - 1.0).abs() < 1e-14);
                assert!((c.scalar[i] - (n * (n - 1)) as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn near_pole_k1_accuracy() {
        // The acid test for the pole kernel: on the round sphere K1 must be
        // accurate to O(dx^2) *relative* error even at the first interior
        // point, where the naive central difference loses two orders.
        let p = round_sphere(2, 1.0, 0.0, 257);
        let c = p.curvature();
        for j in 1..6 {
            let rel = (c.k1[j] - 1.0).abs();
            assert!(rel < 5e-4, "k1 at offset {j}: rel err {rel:.2e}");
        }
        // Extrapolated pole values too.
        assert!((c.k0[0] - 1.0).abs() < 1e-3);
        assert!((c.k1[0] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn flat_cone_is_flat() {
        let p = flat_cone(2, 3.0, 0.0, 101);
        let c = p.curvature();
        for i in 1..p.len() - 1 {
            assert!(c.k0[i].abs() < 1e-12, "k0[{i}] = {}", c.k0[i]);
            assert!(c.k1[i].abs() < 1e-12, "k1[{i}] = {}", c.k1[i]);
            assert!(c.scalar[i].abs() < 1e-11);
        }
    }

    #[test]
    fn csv_roundtrip_is_bitwise() {
        let p = round_sphere(3, 0.7, 0.0125, 33);
        let text = p.to_csv_string();
        let q = Profile::from_csv_str(&text).unwrap();
        assert_eq!(p.n, q.n);
        assert_eq!(p.t, q.t);
        assert_eq!(p.boundary, q.boundary);
        assert_eq!(p.x, q.x);
        assert_eq!(p.phi, q.phi);
        assert_eq!(p.psi, q.psi);
        // And the serialization itself is reproduced byte for byte.
        assert_eq!(text, q.to_csv_string());
    }

    #[test]
    fn validation_rejects_bad_input() {
        let x: Vec<f64> = (0..11).map(|i| -1.0 + 0.2 * i as f64).collect();
        // Nonzero psi at a pole in sphere mode.
        let bad = Profile::new(
            2,
            0.0,
            BoundaryMode::SpherePoles,
            x.clone(),
            vec![1.0; 11],
            vec![0.5; 11],
        );
        assert!(bad.is_err());
        // Nonpositive phi.
        let mut phi = vec![1.0; 11];
        phi[3] = 0.0;
        let bad = Profile::new(2, 0.0, BoundaryMode::IntervalNeumann, x.clone(), phi, vec![1.0; 11]);
        assert!(bad.is_err());
        // Non-uniform grid.
        let mut xs = x.clone();
        xs[5] += 0.05;
        let bad = Profile::new(2, 0.0, BoundaryMode::IntervalNeumann, xs, vec![1.0; 11], vec![1.0; 11]);
        assert!(bad.is_err());
        // n = 1 fibres are not warped products of this kind.
        let bad = Profile::new(1, 0.0, BoundaryMode::IntervalNeumann, x, vec![1.0; 11], vec![1.0; 11]);
        assert!(bad.is_err());
    }

    #[test]
    fn closure_check_flags_cones() {
        let good = round_sphere(2, 1.0, 0.0, 201);
        assert!(good.check_closure(1e-3).is_ok());
        // A profile that meets the pole like 0.8*s (a cone) must fail.
        let m = 201;
        let x: Vec<f64> = (0..m).map(|i| -1.0 + 2.0 * i as f64 / (m as f64 - 1.0)).collect();
        let phi = vec![1.0; m];
        let psi: Vec<f64> = x.iter().map(|&v| 0.8 * (1.0 - v * v)).collect();
        let cone = Profile::new(2, 0.0, BoundaryMode::SpherePoles, x, phi, psi).unwrap();
        assert!(cone.check_closure(1e-3).is_err());
    }
}
