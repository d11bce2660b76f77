//! One-parameter dumbbell family of initial data and the critical-parameter
//! bisection.
//!
//! The family interpolates, as `alpha` runs from 0 to 1, between a mildly
//! waisted single-bump sphere (`alpha = 0`) and a thin-necked dumbbell
//! (`alpha = 1`, neck radius 1% of the bump height). Profiles are assembled
//! in *slope-curvature space*: the arclength derivative profile
//! `v(sbar) = d psi / d sbar` is pieced together from
//!
//! * a big left cap (`v = cos(sbar/a)`, exact sphere cap),
//! * a straight down-ramp (`v = -sigma`),
//! * a parabolic valley (`v' = 1/q`, so `psi = w + (sbar-c)^2/(2q)`),
//! * an up-ramp (`v = +sigma_u`, with `sigma_u -> 0` as `alpha -> 0`),
//! * a right cap whose radius closes the profile exactly (`psi(L) = 0`),
//!
//! joined by crossfades of the *derivative* `v'` weighted by a C^4
//! smoothstep. Blending `v'` (the curvature of the profile) rather than `v`
//! keeps `psi_ss` between the adjacent pieces' values, which is what makes
//! the positive-scalar-curvature constraint hold through every junction:
//! value crossfades overshoot `v'` several-fold and violate it. The result
//! is `C^4` in `sbar`, smooth in `alpha`, and satisfies the structural
//! constraints (one or two bumps, `|psi_s| <= 1`, concave caps, `R > 0`,
//! smooth closure) by construction for the default numerology.
//!
//! As `alpha -> 0` the up-ramp slope and length vanish; the valley's rising
//! branch then ends in a double zero of `v` (a flat tangency), the second
//! bump disappears, and the profile becomes monotone right of its single
//! bump.
//!
//! Sampling onto the uniform `x` grid uses a fixed (per profile) smooth
//! monotone map `sbar(x)` whose density is graded: spacing grows linearly
//! away from the neck center and from each pole, clamped between a fine
//! neck scale proportional to `w(alpha)` and a coarse base scale. That is
//! what lets a ~500-point grid resolve a neck collapsing through two decades
//! while the caps stay cheap.

use crate::diagnostics::{detect_features, Verdict};
use crate::error::FlowError;
use crate::profile::{BoundaryMode, Profile};
use serde::{Deserialize, Serialize};

// ---------------------------------------------------------------------------
// Quadrature and smoothstep helpers
// ---------------------------------------------------------------------------

/// 16-point Gauss-Legendre nodes (positive half) and weights on [-1, 1].
const GL16_X: [f64; 8] = [
    0.0950125098376374,
    0.2816035507792589,
    0.4580167776572274,
    0.6178762444026438,
    0.7554044083550030,
    0.8656312023878318,
    0.9445750230732326,
    0.9894009349916499,
];
const GL16_W: [f64; 8] = [
    0.1894506104550685,
    0.1826034150449236,
    0.1691565193950025,
    0.1495959888165767,
    0.1246289712555339,
    0.0951585116824928,
    0.0622535239386479,
    0.0271524594117541,
];

/// 16-point Gauss-Legendre quadrature of `f` over `[a, b]`.
fn gauss16(a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for i in 0..8 {
        acc += GL16_W[i] * (f(mid + half * GL16_X[i]) + f(mid - half * GL16_X[i]));
    }
    acc * half
}

/// C^4 smoothstep: `u(0) = 0`, `u(1) = 1`, first four derivatives vanish at
/// both ends.
fn smoothstep5(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let x2 = x * x;
    let x4 = x2 * x2;
    let x5 = x4 * x;
    x5 * (126.0 - 420.0 * x + 540.0 * x2 - 315.0 * x2 * x + 70.0 * x4)
}

// ---------------------------------------------------------------------------
// Family specification
// ---------------------------------------------------------------------------

/// Parameters of the dumbbell family. All lengths are geometric (arclength)
/// units; the left bump height equals `cap_radius`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FamilySpec {
    /// Fibre dimension (the manifold is `S^{n+1}`).
    pub n: usize,
    /// Family parameter in `[0, 1]`: 0 = single-bump sphere, 1 = thin neck.
    pub alpha: f64,
    /// Grid points for the sampled profile (odd, at least 65).
    pub n_grid: usize,
    /// Radius of the big left cap.
    pub cap_radius: f64,
    /// Angle (radians) the left cap subtends before its fade-out begins;
    /// also sets the derived down-ramp slope `sigma`.
    pub cap_angle: f64,
    /// Angular width of the cap-to-ramp crossfades.
    pub cap_blend_angle: f64,
    /// Neck waist at `alpha = 1` (thin end of the family).
    pub neck_w_thin: f64,
    /// Neck waist at `alpha = 0` (wide end).
    pub neck_w_wide: f64,
    /// Valley curvature scale: `q = q_factor * w(alpha)`.
    pub q_factor: f64,
    /// Width of the ramp-to-valley crossfade, as a fraction of `q`.
    pub blend_in_frac: f64,
    /// Width of the valley-to-ramp crossfade, as a fraction of `q`.
    pub blend_out_frac: f64,
    /// Up-ramp slope exponent: `sigma_u = sigma * alpha^p`.
    pub up_slope_power: f64,
    /// Up-ramp length exponent: `ell_up = ell_down * alpha^p`.
    pub up_ramp_power: f64,
    /// Finest grid spacing near the neck, as a fraction of `w(alpha)`.
    pub fine_frac: f64,
    /// Grading rate: spacing grows like `grading * distance` away from the
    /// neck and the poles.
    pub grading: f64,
    /// Coarsest spacing is `total length / base_div`.
    pub base_div: f64,
    /// Cap resolution: spacing near a pole is at most `cap radius / cap_res_div`.
    pub cap_res_div: f64,
}

impl Default for FamilySpec {
    fn default() -> Self {
        FamilySpec {
            n: 2,
            alpha: 1.0,
            n_grid: 513,
            cap_radius: 2.0,
            cap_angle: 2.0,
            cap_blend_angle: 0.2,
            neck_w_thin: 0.02,
            neck_w_wide: 0.5,
            q_factor: 8.0,
            blend_in_frac: 0.3,
            blend_out_frac: 0.3,
            up_slope_power: 1.0,
            up_ramp_power: 1.0,
            fine_frac: 0.008,
            grading: 0.08,
            base_div: 48.0,
            cap_res_div: 12.0,
        }
    }
}

impl FamilySpec {
    /// Validate all fields, reporting the dotted path of the first offender.
    pub fn validate(&self) -> Result<(), FlowError> {
        if self.n < 2 {
            return Err(FlowError::config("family.n", "need n >= 2"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(FlowError::config("family.alpha", "must lie in [0, 1]"));
        }
        if self.n_grid < 65 || self.n_grid % 2 == 0 {
            return Err(FlowError::config("family.n_grid", "must be odd and at least 65"));
        }
        if !(self.cap_radius > 0.0) {
            return Err(FlowError::config("family.cap_radius", "must be positive"));
        }
        if !(1.6..=2.6).contains(&self.cap_angle) {
            return Err(FlowError::config(
                "family.cap_angle",
                "must lie in [1.6, 2.6] (past the equator, before the pole)",
            ));
        }
        if !(0.05..=0.5).contains(&self.cap_blend_angle) {
            return Err(FlowError::config("family.cap_blend_angle", "must lie in [0.05, 0.5]"));
        }
        if !(self.neck_w_thin > 0.0 && self.neck_w_wide > self.neck_w_thin) {
            return Err(FlowError::config(
                "family.neck_w_thin",
                "need 0 < neck_w_thin < neck_w_wide",
            ));
        }
        if !(8.0..=100.0).contains(&self.q_factor) {
            return Err(FlowError::config("family.q_factor", "must lie in [8, 100]"));
        }
        for (path, v) in [
            ("family.blend_in_frac", self.blend_in_frac),
            ("family.blend_out_frac", self.blend_out_frac),
        ] {
            if !(0.05..=0.45).contains(&v) {
                return Err(FlowError::config(path, "must lie in [0.05, 0.45]"));
            }
        }
        if !(self.up_slope_power > 0.0 && self.up_ramp_power > 0.0) {
            return Err(FlowError::config("family.up_slope_power", "exponents must be positive"));
        }
        if !(0.001..=0.1).contains(&self.fine_frac) {
            return Err(FlowError::config("family.fine_frac", "must lie in [0.001, 0.1]"));
        }
        if !(0.01..=0.5).contains(&self.grading) {
            return Err(FlowError::config("family.grading", "must lie in [0.01, 0.5]"));
        }
        if !(8.0..=512.0).contains(&self.base_div) {
            return Err(FlowError::config("family.base_div", "must lie in [8, 512]"));
        }
        if !(4.0..=64.0).contains(&self.cap_res_div) {
            return Err(FlowError::config("family.cap_res_div", "must lie in [4, 64]"));
        }
        Ok(())
    }

    /// Neck waist for this `alpha`.
    pub fn waist(&self) -> f64 {
        self.neck_w_thin * self.alpha + self.neck_w_wide * (1.0 - self.alpha)
    }
}

// ---------------------------------------------------------------------------
// Slope-space assembly
// ---------------------------------------------------------------------------

/// One analytic piece of the slope profile `v(sbar)`.
#[derive(Debug, Clone)]
enum PieceKind {
    /// `v = cos(sbar / a)` from the left pole.
    CapLeft { a: f64 },
    /// Crossfade `v' = (1 - u) * cap'`, fading the left cap's curvature out.
    FadeCapLeft { a: f64 },
    /// Constant slope.
    Ramp { v: f64 },
    /// Crossfade `v' = u / q`, fading the valley curvature in.
    FadeValleyIn { q: f64 },
    /// `v' = 1 / q` (parabolic valley).
    Valley { q: f64 },
    /// Crossfade `v' = (1 - u) / q`, fading the valley curvature out.
    FadeValleyOut { q: f64 },
    /// Crossfade `v' = u * cap'`, fading the right cap's curvature in;
    /// `theta_hi` is the cap angle at the piece start (decreasing to
    /// `theta_hi - len/a` at the end).
    FadeCapRight { a: f64, theta_hi: f64 },
    /// `v = -cos(theta)`, `theta = theta_hi - (sbar - s0)/a`, ending at the
    /// right pole with `theta = 0`.
    CapRight { a: f64, theta_hi: f64 },
}

/// A positioned piece with its entry values.
#[derive(Debug, Clone)]
struct Piece {
    kind: PieceKind,
    s0: f64,
    len: f64,
    v0: f64,
    psi0: f64,
}

impl Piece {
    /// `v'` at local offset `d` from the piece start.
    fn vp(&self, d: f64) -> f64 {
        let xi = if self.len > 0.0 { d / self.len } else { 0.0 };
        match self.kind {
            PieceKind::CapLeft { a } => -((self.s0 + d) / a).sin() / a,
            PieceKind::FadeCapLeft { a } => {
                (1.0 - smoothstep5(xi)) * (-((self.s0 + d) / a).sin() / a)
            }
            PieceKind::Ramp { .. } => 0.0,
            PieceKind::FadeValleyIn { q } => smoothstep5(xi) / q,
            PieceKind::Valley { q } => 1.0 / q,
            PieceKind::FadeValleyOut { q } => (1.0 - smoothstep5(xi)) / q,
            PieceKind::FadeCapRight { a, theta_hi } => {
                smoothstep5(xi) * (-(theta_hi - d / a).sin() / a)
            }
            PieceKind::CapRight { a, theta_hi } => -(theta_hi - d / a).sin() / a,
        }
    }

    /// `v` at local offset `d`: closed form where available, else the entry
    /// value plus a quadrature of `v'`.
    fn v(&self, d: f64) -> f64 {
        match self.kind {
            PieceKind::CapLeft { a } => ((self.s0 + d) / a).cos(),
            PieceKind::Ramp { v } => v,
            PieceKind::Valley { q } => self.v0 + d / q,
            PieceKind::CapRight { a, theta_hi } => -(theta_hi - d / a).cos(),
            _ => self.v0 + gauss16(0.0, d, |s| self.vp(s)),
        }
    }

    /// `psi` at local offset `d`.
    fn psi(&self, d: f64) -> f64 {
        match self.kind {
            PieceKind::CapLeft { a } => a * ((self.s0 + d) / a).sin(),
            PieceKind::Ramp { v } => self.psi0 + v * d,
            PieceKind::Valley { q } => self.psi0 + self.v0 * d + d * d / (2.0 * q),
            PieceKind::CapRight { a, theta_hi } => a * (theta_hi - d / a).sin(),
            _ => self.psi0 + gauss16(0.0, d, |s| self.v(s)),
        }
    }
}

/// The assembled analytic profile in arclength.
#[derive(Debug, Clone)]
pub struct SlopeAssembly {
    pieces: Vec<Piece>,
    /// Total arclength.
    pub total_length: f64,
    /// Arclength of the valley center (`v = 0` crossing / tangency).
    pub neck_center: f64,
}

impl SlopeAssembly {
    fn locate(&self, sbar: f64) -> (&Piece, f64) {
        let mut idx = self.pieces.len() - 1;
        for (i, p) in self.pieces.iter().enumerate() {
            if sbar < p.s0 + p.len {
                idx = i;
                break;
            }
        }
        let p = &self.pieces[idx];
        (p, (sbar - p.s0).clamp(0.0, p.len))
    }

    /// `psi` at arclength `sbar` (exact 0 at both ends).
    pub fn psi(&self, sbar: f64) -> f64 {
        if sbar <= 0.0 {
            return 0.0;
        }
        if sbar >= self.total_length {
            return 0.0;
        }
        let (p, d) = self.locate(sbar);
        p.psi(d)
    }

    /// `d psi / d sbar` at `sbar`.
    pub fn slope(&self, sbar: f64) -> f64 {
        let (p, d) = self.locate(sbar.clamp(0.0, self.total_length));
        p.v(d)
    }

    /// `d^2 psi / d sbar^2` at `sbar`.
    pub fn curvature(&self, sbar: f64) -> f64 {
        let (p, d) = self.locate(sbar.clamp(0.0, self.total_length));
        p.vp(d)
    }
}

/// Derived quantities of a family member, for reports and tests.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyReport {
    /// Derived down-ramp slope.
    pub sigma: f64,
    /// Up-ramp slope `sigma * alpha^p`.
    pub sigma_u: f64,
    /// Neck waist `w(alpha)`.
    pub waist: f64,
    /// Valley curvature scale `q = q_factor * w`.
    pub q: f64,
    /// Down-ramp length (solved by the left closure).
    pub ell_down: f64,
    /// Up-ramp length.
    pub ell_up: f64,
    /// Right cap fade-in start angle.
    pub theta_end: f64,
    /// Right cap radius (solved by the right closure).
    pub cap_radius_right: f64,
    /// Total arclength of the profile.
    pub total_length: f64,
    /// Arclength position of the neck center.
    pub neck_center: f64,
    /// Natural (unnormalized) point count of the grading map.
    pub natural_points: f64,
    /// Achieved spacing at the neck after fitting the grid budget.
    pub neck_spacing: f64,
    /// Piece table: name, start, length.
    pub pieces: Vec<(String, f64, f64)>,
}

/// A built family member: the sampled profile plus its derived numbers.
#[derive(Debug, Clone)]
pub struct FamilyBuild {
    /// Sphere-mode profile on the uniform `x` grid.
    pub profile: Profile,
    /// Derived quantities.
    pub report: FamilyReport,
    /// The analytic arclength assembly the profile samples.
    pub assembly: SlopeAssembly,
}

/// Assemble the analytic slope profile for a spec. Exposed for tests; most
/// callers want [`build_initial`].
pub fn assemble(spec: &FamilySpec) -> Result<(SlopeAssembly, FamilyReport), FlowError> {
    spec.validate()?;
    let a_l = spec.cap_radius;
    let th1 = spec.cap_angle;
    let fb = spec.cap_blend_angle;
    let w = spec.waist();
    let q = spec.q_factor * w;
    let d_in = spec.blend_in_frac * q;
    let d_out = spec.blend_out_frac * q;

    // Left cap fade: sigma = -v at fade end (angle space, radius scales out).
    let sigma = -(th1.cos()) + gauss16(0.0, fb, |z| (1.0 - smoothstep5(z / fb)) * (th1 + z).sin());
    // v at valley entry after the fade-in crossfade.
    let sigma_v = sigma - 0.5 * spec.blend_in_frac;
    if sigma_v <= 0.05 {
        return Err(FlowError::config(
            "family.blend_in_frac",
            format!("leaves valley entry slope {sigma_v:.3} <= 0.05"),
        ));
    }
    let sigma_u = sigma * spec.alpha.powf(spec.up_slope_power);
    let sigma_vu = sigma_u - 0.5 * spec.blend_out_frac;
    if sigma_v + sigma_vu <= 0.0 {
        return Err(FlowError::config(
            "family.blend_out_frac",
            "valley segment would have nonpositive length",
        ));
    }

    // psi at the end of the left fade (cap units).
    let fade_v = |z: f64| -> f64 {
        th1.cos() - gauss16(0.0, z, |zz| (1.0 - smoothstep5(zz / fb)) * (th1 + zz).sin())
    };
    let psi_fade_end = a_l * (th1.sin() + gauss16(0.0, fb, fade_v));

    // Valley bookkeeping (exact integrals of the crossfaded v').
    // c2 = integral_0^1 u(z) (1 - z) dz for the C^4 smoothstep.
    let c2 = gauss16(0.0, 1.0, |z| smoothstep5(z) * (1.0 - z));
    let h_left = w + 0.5 * sigma_v * sigma_v * q; // psi at valley entry
    let psi_a3 = h_left + sigma * d_in - c2 * d_in * d_in / q; // psi at fade-in start
    let ell_down = (psi_fade_end - psi_a3) / sigma;
    if ell_down < 0.02 {
        return Err(FlowError::ConstraintViolation {
            condition: "down-ramp length".into(),
            detail: format!(
                "ell_down = {ell_down:.4}; the valley does not fit under the cap (lower q_factor or neck_w_wide)"
            ),
        });
    }
    let valley_len = (sigma_v + sigma_vu) * q;
    let psi_a5 = w + 0.5 * sigma_vu * sigma_vu * q; // psi at valley exit
    // Fade-out: v' = (1-u)/q; gains already in closed form.
    let d3 = gauss16(0.0, 1.0, |z| (1.0 - smoothstep5(z)) * (1.0 - z));
    let psi_a6 = psi_a5 + sigma_vu * d_out + d3 * d_out * d_out / q;
    let ell_up = ell_down * spec.alpha.powf(spec.up_ramp_power);
    let psi_a7 = psi_a6 + sigma_u * ell_up;

    // Right cap fade-in start angle: solve g(theta) = sigma_u with
    // g(theta) = -cos(theta) + int (1-u) sin(theta + z) dz (same functional
    // as the left fade), monotone on the search bracket.
    let g = |theta: f64| -> f64 {
        -(theta.cos()) + gauss16(0.0, fb, |z| (1.0 - smoothstep5(z / fb)) * (theta + z).sin())
    };
    let (mut lo, mut hi) = (0.2_f64, 2.9_f64);
    if !(g(lo) < sigma_u && g(hi) > sigma_u) {
        return Err(FlowError::ConstraintViolation {
            condition: "right cap angle".into(),
            detail: format!("no fade-in angle reproduces slope {sigma_u:.4}"),
        });
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < sigma_u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta_end = 0.5 * (lo + hi);

    // psi gained across the right fade, per unit cap radius. The fade spans
    // cap angles [theta_end + fb, theta_end] as sbar increases.
    let fade_r_v = |z: f64| -> f64 {
        // v at angle offset z into the fade (z in [0, fb]).
        sigma_u - gauss16(0.0, z, |zz| smoothstep5(zz / fb) * (theta_end + fb - zz).sin())
    };
    let i4 = gauss16(0.0, fb, fade_r_v);
    let denom = theta_end.sin() - i4;
    if denom <= 1e-6 {
        return Err(FlowError::ConstraintViolation {
            condition: "right cap closure".into(),
            detail: format!("degenerate closure denominator {denom:.3e}"),
        });
    }
    let a_r = psi_a7 / denom;

    // Consistency of the fade-in: v at its end must equal the cap's value.
    let v_fade_end = fade_r_v(fb);
    debug_assert!(
        (v_fade_end + theta_end.cos()).abs() < 1e-10,
        "right fade mismatch: {v_fade_end} vs {}",
        -theta_end.cos()
    );

    // Assemble the piece table.
    let mut pieces: Vec<Piece> = Vec::with_capacity(9);
    let mut s = 0.0;
    let mut v = 1.0;
    let mut psi = 0.0;
    let push = |pieces: &mut Vec<Piece>, kind: PieceKind, len: f64, s: &mut f64, v: &mut f64, psi: &mut f64| {
        let piece = Piece { kind, s0: *s, len, v0: *v, psi0: *psi };
        if len > 0.0 {
            *v = piece.v(len);
            *psi = piece.psi(len);
            *s += len;
        }
        pieces.push(piece);
    };
    push(&mut pieces, PieceKind::CapLeft { a: a_l }, a_l * th1, &mut s, &mut v, &mut psi);
    push(&mut pieces, PieceKind::FadeCapLeft { a: a_l }, a_l * fb, &mut s, &mut v, &mut psi);
    push(&mut pieces, PieceKind::Ramp { v: -sigma }, ell_down, &mut s, &mut v, &mut psi);
    push(&mut pieces, PieceKind::FadeValleyIn { q }, d_in, &mut s, &mut v, &mut psi);
    push(&mut pieces, PieceKind::Valley { q }, valley_len, &mut s, &mut v, &mut psi);
    push(&mut pieces, PieceKind::FadeValleyOut { q }, d_out, &mut s, &mut v, &mut psi);
    push(&mut pieces, PieceKind::Ramp { v: sigma_u }, ell_up, &mut s, &mut v, &mut psi);
    push(
        &mut pieces,
        PieceKind::FadeCapRight { a: a_r, theta_hi: theta_end + fb },
        a_r * fb,
        &mut s,
        &mut v,
        &mut psi,
    );
    push(
        &mut pieces,
        PieceKind::CapRight { a: a_r, theta_hi: theta_end },
        a_r * theta_end,
        &mut s,
        &mut v,
        &mut psi,
    );
    let total_length = s;
    debug_assert!(psi.abs() < 1e-9 * a_l, "right closure missed: psi(L) = {psi:.3e}");

    // Neck center: v = 0 inside the valley when sigma_vu >= 0, otherwise the
    // tangency sits at the end of the fade-out. Either way it is where the
    // assembly's slope crosses/touches zero past the valley entry.
    let valley_start = pieces[4].s0;
    let neck_center = if sigma_vu >= 0.0 {
        valley_start + sigma_v * q
    } else {
        pieces[5].s0 + d_out
    };

    let report = FamilyReport {
        sigma,
        sigma_u,
        waist: w,
        q,
        ell_down,
        ell_up,
        theta_end,
        cap_radius_right: a_r,
        total_length,
        neck_center,
        natural_points: 0.0, // filled by the sampler
        neck_spacing: 0.0,   // filled by the sampler
        pieces: pieces
            .iter()
            .map(|p| {
                let name = match p.kind {
                    PieceKind::CapLeft { .. } => "cap_left",
                    PieceKind::FadeCapLeft { .. } => "fade_cap_left",
                    PieceKind::Ramp { v } if v < 0.0 => "ramp_down",
                    PieceKind::Ramp { .. } => "ramp_up",
                    PieceKind::FadeValleyIn { .. } => "fade_valley_in",
                    PieceKind::Valley { .. } => "valley",
                    PieceKind::FadeValleyOut { .. } => "fade_valley_out",
                    PieceKind::FadeCapRight { .. } => "fade_cap_right",
                    PieceKind::CapRight { .. } => "cap_right",
                };
                (name.to_string(), p.s0, p.len)
            })
            .collect(),
    };
    Ok((SlopeAssembly { pieces, total_length, neck_center }, report))
}

// ---------------------------------------------------------------------------
// Graded sampling map
// ---------------------------------------------------------------------------

/// Smooth target spacing at arclength `sbar`: graded away from the neck and
/// both poles, clamped to a base scale. A smooth 4-norm minimum keeps the
/// map C^infinity, which the pole reflection stencils need.
struct GradedSpacing {
    neck_center: f64,
    total: f64,
    fine: f64,
    grading: f64,
    base: f64,
    cap_l: f64,
    cap_r: f64,
}

impl GradedSpacing {
    /// How many pole cells the spacing is held locally uniform across.
    ///
    /// The evolution equations close one-sided stencils over the last few
    /// rows at each pole, and a collapsing cap keeps its slope bound margin
    /// at the truncation-error level there. Cell-to-cell spacing growth in
    /// that zone feeds those stencils a steady residual that a deep run
    /// integrates into a slope-bound violation, while a locally uniform
    /// mesh (like the plain sphere grid, which tracks cap collapse through
    /// many curvature decades) stays clean. Softening the pole distance as
    /// d^3 / (d^2 + l^2) with l = this many cells flattens the growth to
    /// ~0.01% per cell in the zone and leaves the mesh beyond ~l unchanged.
    const POLE_FLAT_CELLS: f64 = 8.0;

    fn at(&self, sbar: f64) -> f64 {
        let g = self.grading;
        let soften = |d: f64, cell: f64| {
            let l = Self::POLE_FLAT_CELLS * cell;
            d * d * d / (d * d + l * l)
        };
        let neck = f64::hypot(g * (sbar - self.neck_center), self.fine);
        let pole_l = f64::hypot(g * soften(sbar, self.cap_l), self.cap_l);
        let pole_r = f64::hypot(g * soften(self.total - sbar, self.cap_r), self.cap_r);
        let base = self.base;
        // Smooth minimum: inverse 4-norm.
        let s = neck.powi(-4) + pole_l.powi(-4) + pole_r.powi(-4) + base.powi(-4);
        s.powf(-0.25)
    }
}

/// Sample the assembly onto a uniform `x` grid through the graded map.
fn sample_profile(
    spec: &FamilySpec,
    assembly: &SlopeAssembly,
    report: &mut FamilyReport,
) -> Result<Profile, FlowError> {
    let l = assembly.total_length;
    let spacing = GradedSpacing {
        neck_center: assembly.neck_center,
        total: l,
        fine: spec.fine_frac * spec.waist(),
        grading: spec.grading,
        base: l / spec.base_div,
        cap_l: spec.cap_radius / spec.cap_res_div,
        cap_r: report.cap_radius_right / spec.cap_res_div,
    };

    // Natural point count: N_total = integral ds / spacing, by RK4 marching
    // of ds/dN = spacing(s) until s >= L.
    let mut n_total = 0.0;
    {
        let dn = 1.0 / 16.0;
        let mut s: f64 = 0.0;
        while s < l {
            let k1 = spacing.at(s);
            let k2 = spacing.at((s + 0.5 * dn * k1).min(l));
            let k3 = spacing.at((s + 0.5 * dn * k2).min(l));
            let k4 = spacing.at((s + dn * k3).min(l));
            let step = dn / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if s + step >= l {
                n_total += (l - s) / step * dn;
                break;
            }
            s += step;
            n_total += dn;
        }
    }
    report.natural_points = n_total;

    // Integrate the map at exactly n_grid points: 8 RK4 substeps per grid
    // interval in the N variable, scaled so N runs over [0, n_total].
    let m = spec.n_grid;
    let scale = n_total / (m as f64 - 1.0);
    let mut sbar = vec![0.0; m];
    let mut s: f64 = 0.0;
    let sub = 8;
    let dn = scale / sub as f64;
    for node in sbar.iter_mut().take(m).skip(1) {
        for _ in 0..sub {
            let k1 = spacing.at(s.min(l));
            let k2 = spacing.at((s + 0.5 * dn * k1).min(l));
            let k3 = spacing.at((s + 0.5 * dn * k2).min(l));
            let k4 = spacing.at((s + dn * k3).min(l));
            s += dn / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        *node = s;
    }
    // The march lands at L up to integration error; pin the end exactly.
    let drift = (sbar[m - 1] - l).abs();
    if drift > 1e-6 * l {
        return Err(FlowError::InvalidInput(format!(
            "grading map integration drifted by {drift:.3e}"
        )));
    }
    sbar[m - 1] = l;

    let x: Vec<f64> = (0..m).map(|i| -1.0 + 2.0 * i as f64 / (m as f64 - 1.0)).collect();
    let dx = 2.0 / (m as f64 - 1.0);
    // phi = ds/dx = spacing * (dN/dx) = spacing * n_total / 2.
    let phi: Vec<f64> = sbar.iter().map(|&sv| spacing.at(sv) * scale / dx).collect();
    let psi: Vec<f64> = sbar.iter().map(|&sv| assembly.psi(sv)).collect();
    report.neck_spacing = spacing.at(assembly.neck_center) * scale / dx * dx;

    Profile::new(spec.n, 0.0, BoundaryMode::SpherePoles, x, phi, psi)
}

/// Build a family member: validate, assemble, sample, and check the
/// structural constraints of the sampled profile.
pub fn build_initial(spec: &FamilySpec) -> Result<FamilyBuild, FlowError> {
    let (assembly, mut report) = assemble(spec)?;
    let profile = sample_profile(spec, &assembly, &mut report)?;
    ensure_constraints(&profile)?;
    Ok(FamilyBuild { profile, report, assembly })
}

// ---------------------------------------------------------------------------
// Structural constraints
// ---------------------------------------------------------------------------

/// One structural condition's outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionCheck {
    /// Short name of the condition.
    pub name: String,
    /// Whether it held.
    pub passed: bool,
    /// The measured quantity.
    pub measured: f64,
    /// The threshold it was compared against.
    pub threshold: f64,
    /// Human-readable detail.
    pub detail: String,
}

/// Outcome of all structural checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstraintReport {
    /// Individual conditions.
    pub checks: Vec<ConditionCheck>,
    /// True when every condition passed.
    pub passed: bool,
}

/// Check the structural constraints a family profile must satisfy: one or
/// two bumps (with a neck iff two), interior slope bound `|psi_s| <= 1`,
/// concavity between the left pole and the first bump, monotone descent
/// right of the last bump, strictly positive scalar curvature, and smooth
/// pole closure.
pub fn check_constraints(p: &Profile) -> ConstraintReport {
    let mut checks = Vec::new();
    let feats = detect_features(p);
    let nb = feats.bumps.len();
    let nn = feats.necks.len();
    let bumps_ok = (nb == 1 && nn == 0) || (nb == 2 && nn == 1);
    checks.push(ConditionCheck {
        name: "bump_structure".into(),
        passed: bumps_ok,
        measured: nb as f64,
        threshold: 2.0,
        detail: format!("{nb} bump(s), {nn} neck(s); need 1 bump/0 necks or 2 bumps/1 neck"),
    });

    let c = p.curvature();
    let m = p.len();
    let mut max_slope = 0.0_f64;
    for i in 1..m - 1 {
        max_slope = max_slope.max(c.psi_s[i].abs());
    }
    let slope_tol = 1.0 + 1e-8;
    checks.push(ConditionCheck {
        name: "slope_bound".into(),
        passed: max_slope <= slope_tol,
        measured: max_slope,
        threshold: slope_tol,
        detail: format!("max interior |psi_s| = {max_slope:.10}"),
    });

    // Concavity from the left pole to the first bump. Only the left cap is
    // required to be concave: when the right cap degenerates, the region
    // right of the single bump absorbs the convex valley remnant, which is
    // legitimate shape there.
    let cc_tol = 1e-3 * p.psi_max();
    let mut worst_cc = f64::NEG_INFINITY;
    if let Some(first) = feats.bumps.first() {
        for i in 0..=first.index {
            worst_cc = worst_cc.max(c.psi_ss[i]);
        }
    } else {
        worst_cc = f64::INFINITY; // no bump at all: fail below via bump check
    }
    checks.push(ConditionCheck {
        name: "cap_concavity".into(),
        passed: worst_cc <= cc_tol,
        measured: worst_cc,
        threshold: cc_tol,
        detail: format!("max psi_ss over left cap = {worst_cc:.3e}"),
    });

    // Right of the last bump the profile must descend monotonically into the
    // right pole: no further structure is allowed there, only the (possibly
    // convex) slide from the final maximum down to closure.
    let rise_tol = 1e-9 * p.psi_max();
    let mut worst_rise = f64::NEG_INFINITY;
    if let Some(last) = feats.bumps.last() {
        for i in last.index..m - 1 {
            worst_rise = worst_rise.max(p.psi[i + 1] - p.psi[i]);
        }
    } else {
        worst_rise = f64::INFINITY;
    }
    checks.push(ConditionCheck {
        name: "right_cap_monotone".into(),
        passed: worst_rise <= rise_tol,
        measured: worst_rise,
        threshold: rise_tol,
        detail: format!("max psi rise right of last bump = {worst_rise:.3e}"),
    });

    let mut min_scalar = f64::INFINITY;
    for &v in &c.scalar {
        min_scalar = min_scalar.min(v);
    }
    checks.push(ConditionCheck {
        name: "scalar_positive".into(),
        passed: min_scalar > 0.0,
        measured: min_scalar,
        threshold: 0.0,
        detail: format!("min scalar curvature = {min_scalar:.6e}"),
    });

    let ds = p.phi[0].max(p.phi[m - 1]) * p.dx();
    let closure_tol = 1e-6 + 100.0 * ds * ds * c.k0[0].abs().max(c.k0[m - 1].abs()).max(1.0);
    let closure = p.check_closure(closure_tol);
    checks.push(ConditionCheck {
        name: "smooth_closure".into(),
        passed: closure.is_ok(),
        measured: 0.0,
        threshold: closure_tol,
        detail: match &closure {
            Ok(()) => "one-sided pole slopes within tolerance of +-1".into(),
            Err(e) => format!("{e}"),
        },
    });

    let passed = checks.iter().all(|c| c.passed);
    ConstraintReport { checks, passed }
}

/// Error-returning form of [`check_constraints`].
pub fn ensure_constraints(p: &Profile) -> Result<(), FlowError> {
    let report = check_constraints(p);
    if let Some(bad) = report.checks.iter().find(|c| !c.passed) {
        return Err(FlowError::ConstraintViolation {
            condition: bad.name.clone(),
            detail: bad.detail.clone(),
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Critical-parameter bisection
// ---------------------------------------------------------------------------

/// Bisection bracket and budget.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BisectSettings {
    /// Lower end of the initial bracket.
    pub alpha_lo: f64,
    /// Upper end of the initial bracket.
    pub alpha_hi: f64,
    /// Stop when the bracket is at most this wide.
    pub tol: f64,
    /// Budget for probe flows (endpoints, midpoints, and retries all count).
    pub max_probes: usize,
}

impl Default for BisectSettings {
    fn default() -> Self {
        BisectSettings { alpha_lo: 0.0, alpha_hi: 1.0, tol: 1.0 / 64.0, max_probes: 8 }
    }
}

/// One probe flow's outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeRecord {
    /// Family parameter probed.
    pub alpha: f64,
    /// Classifier verdict.
    pub verdict: Verdict,
    /// Maximum blow-up ratio observed.
    pub max_ratio: Option<f64>,
    /// Fitted blow-up time.
    pub t_est: Option<f64>,
    /// True when this probe ran at doubled resolution (a retry).
    pub doubled: bool,
    /// Extra notes (retry reasons, side assignments).
    pub note: Option<String>,
}

/// Result of the bisection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BisectOutcome {
    /// Final bracket: largest probed alpha that did not pinch cleanly.
    pub alpha_lo: f64,
    /// Final bracket: smallest probed alpha that pinched.
    pub alpha_hi: f64,
    /// Bracket midpoint (the critical-parameter estimate).
    pub alpha_critical: f64,
    /// Every probe flow, in execution order.
    pub history: Vec<ProbeRecord>,
    /// Number of probe flows executed.
    pub probes_used: usize,
    /// True when the bracket reached the tolerance within budget.
    pub converged: bool,
}

/// Locate the critical family parameter by bisection on the classifier
/// verdict. `probe(alpha, doubled)` must run the flow for that member and
/// classify it; `doubled` requests doubled spatial resolution (used once to
/// retry an unresolved probe).
///
/// Invariants kept: the upper bracket end always carries a clean
/// `type_I_neckpinch` verdict; probes that stay unresolved after the retry
/// are assigned to the lower side with an explanatory note. Errors:
/// [`FlowError::InconsistentEndpoints`] when the initial endpoints do not
/// exhibit the dichotomy.
pub fn bisect_critical<F>(
    settings: &BisectSettings,
    mut probe: F,
) -> Result<BisectOutcome, FlowError>
where
    F: FnMut(f64, bool) -> Result<ProbeRecord, FlowError>,
{
    if !(settings.alpha_lo < settings.alpha_hi) {
        return Err(FlowError::config("bisect.alpha_lo", "bracket must be nonempty"));
    }
    if !(settings.tol > 0.0) {
        return Err(FlowError::config("bisect.tol", "must be positive"));
    }
    let mut history: Vec<ProbeRecord> = Vec::new();
    let mut probes_used = 0usize;

    let mut run_probe = |alpha: f64,
                         history: &mut Vec<ProbeRecord>,
                         probes_used: &mut usize|
     -> Result<ProbeRecord, FlowError> {
        *probes_used += 1;
        let mut rec = probe(alpha, false)?;
        rec.alpha = alpha;
        if rec.verdict == Verdict::Unresolved {
            *probes_used += 1;
            let mut retry = probe(alpha, true)?;
            retry.alpha = alpha;
            retry.doubled = true;
            retry.note = Some(format!(
                "retry at doubled resolution after unresolved probe{}",
                rec.note.as_deref().map(|n| format!(" ({n})")).unwrap_or_default()
            ));
            history.push(rec);
            rec = retry;
        }
        history.push(rec.clone());
        Ok(rec)
    };

    let hi_rec = run_probe(settings.alpha_hi, &mut history, &mut probes_used)?;
    if hi_rec.verdict != Verdict::TypeINeckpinch {
        return Err(FlowError::InconsistentEndpoints {
            detail: format!(
                "alpha = {} classified {:?}, expected a type-I neckpinch at the top",
                settings.alpha_hi, hi_rec.verdict
            ),
        });
    }
    let lo_rec = run_probe(settings.alpha_lo, &mut history, &mut probes_used)?;
    if !matches!(lo_rec.verdict, Verdict::RoundPoint | Verdict::TypeIiCandidate) {
        return Err(FlowError::InconsistentEndpoints {
            detail: format!(
                "alpha = {} classified {:?}, expected round_point or type_II_candidate at the bottom",
                settings.alpha_lo, lo_rec.verdict
            ),
        });
    }

    let (mut lo, mut hi) = (settings.alpha_lo, settings.alpha_hi);
    while hi - lo > settings.tol && probes_used < settings.max_probes {
        let mid = 0.5 * (lo + hi);
        let mut rec = run_probe(mid, &mut history, &mut probes_used)?;
        match rec.verdict {
            Verdict::TypeINeckpinch => hi = mid,
            Verdict::RoundPoint | Verdict::TypeIiCandidate => lo = mid,
            Verdict::Unresolved => {
                rec.note = Some("unresolved after retry; assigned to the lower side".into());
                let last = history.len() - 1;
                history[last].note = rec.note.clone();
                lo = mid;
            }
        }
    }

    Ok(BisectOutcome {
        alpha_lo: lo,
        alpha_hi: hi,
        alpha_critical: 0.5 * (lo + hi),
        history,
        probes_used,
        converged: hi - lo <= settings.tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assembly_closes_and_is_continuous() {
        for &alpha in &[0.0, 0.25, 0.5, 0.75, 1.0] {
            let spec = FamilySpec { alpha, ..Default::default() };
            let (asm, rep) = assemble(&spec).unwrap();
            // psi closes at both ends.
            assert!(asm.psi(0.0) == 0.0 && asm.psi(asm.total_length) == 0.0);
            // v and psi are continuous across piece boundaries.
            for p in &asm.pieces[1..] {
                let before = asm.slope(p.s0 - 1e-9);
                let after = asm.slope(p.s0 + 1e-9);
                assert!(
                    (before - after).abs() < 1e-6,
                    "slope jump {before} -> {after} at s = {} (alpha {alpha})",
                    p.s0
                );
            }
            // Slopes close like a smooth sphere at the poles.
            assert!((asm.slope(0.0) - 1.0).abs() < 1e-12);
            assert!((asm.slope(asm.total_length) + 1.0).abs() < 1e-12);
            // Right cap radius is positive and bounded by the left cap.
            assert!(rep.cap_radius_right > 0.0 && rep.cap_radius_right < 1.2 * spec.cap_radius);
        }
    }

    #[test]
    fn waist_is_attained() {
        for &alpha in &[0.3, 1.0] {
            let spec = FamilySpec { alpha, ..Default::default() };
            let (asm, rep) = assemble(&spec).unwrap();
            // Minimum of psi over the valley equals w when the up slope is
            // large enough for the vertex to sit inside the pure valley.
            let mut min_psi = f64::INFINITY;
            let mut s = rep.pieces[3].1; // fade_valley_in start
            let end = rep.pieces[6].1; // ramp_up start
            while s < end {
                min_psi = min_psi.min(asm.psi(s));
                s += 1e-4;
            }
            assert!(
                (min_psi - rep.waist).abs() < 1e-3 * rep.waist + 2e-5,
                "alpha {alpha}: min psi {min_psi} vs waist {}",
                rep.waist
            );
        }
    }

    #[test]
    fn alpha_one_is_thin_alpha_zero_is_monotone_right() {
        let thin = assemble(&FamilySpec { alpha: 1.0, ..Default::default() }).unwrap();
        assert!((thin.1.waist - 0.02).abs() < 1e-12);
        let merged = assemble(&FamilySpec { alpha: 0.0, ..Default::default() }).unwrap();
        // Right of the neck center the slope never becomes positive.
        let (asm, _) = &merged;
        let mut s = asm.neck_center;
        let mut max_v = f64::NEG_INFINITY;
        while s < asm.total_length {
            max_v = max_v.max(asm.slope(s));
            s += 1e-3;
        }
        assert!(max_v <= 1e-9, "alpha=0 slope right of neck reaches {max_v}");
    }

    #[test]
    fn build_initial_passes_constraints_across_alpha() {
        for &alpha in &[0.0, 0.37, 0.8, 1.0] {
            let spec = FamilySpec { alpha, n_grid: 513, ..Default::default() };
            let build = build_initial(&spec).expect("build should succeed");
            let report = check_constraints(&build.profile);
            assert!(report.passed, "alpha {alpha}: {:#?}", report.checks);
        }
    }

    #[test]
    fn thin_member_has_one_percent_neck() {
        let build = build_initial(&FamilySpec { alpha: 1.0, ..Default::default() }).unwrap();
        let feats = detect_features(&build.profile);
        let r_min = feats.r_min.expect("thin member has a neck");
        let cap = feats.psi_at_x_minus.expect("has bumps");
        let ratio = r_min / cap;
        assert!(
            (ratio - 0.01).abs() < 0.15 * 0.01,
            "neck/cap ratio {ratio:.5} should be near 0.01"
        );
    }

    #[test]
    fn synthetic_bisection_brackets_threshold() {
        let theta = 0.37;
        let mut flows = 0usize;
        let probe = |alpha: f64, _doubled: bool| -> Result<ProbeRecord, FlowError> {
            flows += 1;
            Ok(ProbeRecord {
                alpha,
                verdict: if alpha > theta { Verdict::TypeINeckpinch } else { Verdict::RoundPoint },
                max_ratio: None,
                t_est: None,
                doubled: false,
                note: None,
            })
        };
        let settings = BisectSettings { tol: 1.0 / 256.0, max_probes: 32, ..Default::default() };
        let out = bisect_critical(&settings, probe).unwrap();
        assert!(out.converged);
        assert!(out.alpha_lo <= theta && theta <= out.alpha_hi, "{out:?}");
        assert!(out.alpha_hi - out.alpha_lo <= 1.0 / 256.0);
        // 2 endpoint probes + 8 midpoints for a 1/256 bracket.
        assert_eq!(out.probes_used, 10);
        assert_eq!(flows, 10);
    }

    #[test]
    fn inconsistent_endpoints_are_rejected() {
        let probe = |alpha: f64, _| -> Result<ProbeRecord, FlowError> {
            Ok(ProbeRecord {
                alpha,
                verdict: Verdict::RoundPoint, // even at the top
                max_ratio: None,
                t_est: None,
                doubled: false,
                note: None,
            })
        };
        let settings = BisectSettings::default();
        assert!(matches!(
            bisect_critical(&settings, probe),
            Err(FlowError::InconsistentEndpoints { .. })
        ));
    }

    #[test]
    fn unresolved_probe_is_retried_then_assigned_low() {
        // Midpoint probes are unresolved at base resolution; the retry at
        // doubled resolution resolves all but one of them.
        let theta = 0.4;
        let probe = |alpha: f64, doubled: bool| -> Result<ProbeRecord, FlowError> {
            let verdict = if alpha == 0.0 || alpha == 1.0 {
                if alpha > theta { Verdict::TypeINeckpinch } else { Verdict::RoundPoint }
            } else if !doubled {
                Verdict::Unresolved
            } else if (alpha - 0.5).abs() < 1e-12 {
                Verdict::Unresolved // stays unresolved even doubled
            } else if alpha > theta {
                Verdict::TypeINeckpinch
            } else {
                Verdict::RoundPoint
            };
            Ok(ProbeRecord { alpha, verdict, max_ratio: None, t_est: None, doubled, note: None })
        };
        let settings =
            BisectSettings { tol: 0.2, max_probes: 64, ..Default::default() };
        let out = bisect_critical(&settings, probe).unwrap();
        // alpha = 0.5 was assigned low despite being above theta: the
        // recorded outcome says so honestly.
        assert!(out
            .history
            .iter()
            .any(|r| (r.alpha - 0.5).abs() < 1e-12 && r.note.as_deref().is_some_and(|n| n.contains("assigned"))));
        assert!(out.alpha_lo >= 0.5 - 1e-12);
    }
}
