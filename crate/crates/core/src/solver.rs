//! Explicit evolution of the rotationally symmetric Ricci flow.
//!
//! In the warped-product gauge the flow `dg/dt = -2 Ric(g)` closes on the
//! two warping functions:
//!
//! ```text
//! phi_t = n (psi_ss / psi) phi,
//! psi_t = psi_ss - (n-1) (1 - psi_s^2) / psi .
//! ```
//!
//! The grid is Lagrangian in `x` (no reparametrization); geometric
//! resolution near a developing neck is provided by the initial-data
//! construction, which concentrates `phi` there. Time stepping is classic
//! RK4 with an adaptive step
//!
//! ```text
//! dt = cfl * min( (min_i phi_i * dx)^2 / 2 ,  1 / ((n-1) * K_max) ),
//! ```
//!
//! the first term being the parabolic limit of the `psi_ss` diffusion, the
//! second a guard against the reaction term `-(n-1)(1-psi_s^2)/psi`
//! stiffening faster than the resolved diffusion limit when curvature is
//! under-resolved. Steps whose result loses interior positivity of `psi`,
//! exceeds the slope barrier `|psi_s| <= 1 + tol`, or goes non-finite are
//! rejected and retried with half the step.
//!
//! Every accepted state is observed: curvature maxima, neck/bump features,
//! and a set of structural monitors (slope barrier, scalar-curvature
//! positivity, bump-count monotonicity, a logarithmic neck-pinching
//! functional, pole closure). Violation counts are reported, never silently
//! repaired.

use crate::diagnostics::{detect_features, Features};
use crate::error::FlowError;
use crate::profile::{geometric_derivatives_into, BoundaryMode, Profile};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// Tunable parameters of a flow run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Safety factor applied to both stability limits.
    pub cfl_safety: f64,
    /// Stop once `t >= t_max` (the last step is clipped to land exactly).
    pub t_max: Option<f64>,
    /// Stop once the pointwise curvature magnitude reaches this cap.
    pub k_stop: f64,
    /// Interior `psi` below `psi_floor_rel * max(psi(0))` counts as a
    /// degenerate metric.
    pub psi_floor_rel: f64,
    /// Invariant-monitor bound: accepted states with interior
    /// `|psi_s| > 1 + slope_tol` are counted as slope violations.
    pub slope_tol: f64,
    /// Step-rejection guard: candidate states with interior
    /// `|psi_s| > 1 + slope_reject` are rejected and retried at smaller dt.
    ///
    /// Deliberately looser than `slope_tol`. A degenerately pinching tip
    /// steepens toward unit slope inside the domain, so the discrete
    /// profile's O(spacing^2) wiggle must be allowed to graze the bound or
    /// the run stalls on rejections before the blow-up is resolved; the
    /// monitors still record every excursion past `slope_tol`. Runs whose
    /// true solution keeps a healthy slope margin (round profiles, ordinary
    /// neckpinches) never reach either threshold, and the junk curvature
    /// `|1 - psi_s^2| / psi^2` a grazing excursion can inject stays below
    /// the genuine tip curvature as long as this guard is small.
    pub slope_reject: f64,
    /// Maximum consecutive step rejections before giving up.
    pub max_rejects: u32,
    /// Hard bound on accepted steps (safety net; terminates the run).
    pub max_steps: u64,
    /// Record a full profile snapshot every this many accepted steps; the
    /// stride doubles automatically to keep the stored count bounded.
    /// The last 64 accepted states are always retained as well.
    pub snapshot_stride: u64,
    /// Append a series record every this many accepted steps (the monitors
    /// still observe every accepted step).
    pub record_stride: u64,
    /// Verify smooth pole closure of sphere initial data before flowing.
    pub check_closure: bool,
    /// Print a one-line progress report to stderr every this many accepted
    /// steps (0 disables; intended for long runs driven interactively).
    pub progress_every: u64,
    /// Upper bound the pinching monitor must stay below.
    pub pinching_bound: f64,
}

/// Strength of the fourth-difference dissipation applied to `psi` in sphere
/// mode (see [`module docs`](self)); the grid-scale damping rate it buys is
/// this value over `(phi dx)^2`, and its smooth-data footprint is
/// `O((phi dx)^2)`, the same order as the scheme truncation.
const CHECKERBOARD_DISSIPATION: f64 = 1.0;

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            cfl_safety: 0.2,
            t_max: None,
            k_stop: 1e8,
            psi_floor_rel: 1e-10,
            slope_tol: 1e-6,
            slope_reject: 1e-3,
            max_rejects: 20,
            max_steps: 50_000_000,
            snapshot_stride: 64,
            record_stride: 1,
            check_closure: true,
            progress_every: 0,
            pinching_bound: 1e3,
        }
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// The curvature cap `k_stop` was reached (blow-up resolved to target).
    CurvatureCap,
    /// Requested final time reached.
    TMax,
    /// The adaptive step collapsed below the representable floor; the last
    /// accepted state is still valid.
    DtFloor,
    /// The accepted-step budget ran out.
    StepBudget,
}

/// One observed instant of a flow run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesRecord {
    /// Accepted-step counter at this record.
    pub step: u64,
    /// Flow time.
    pub t: f64,
    /// Step size used to reach this state (0 for the initial record).
    pub dt: f64,
    /// Largest pointwise curvature magnitude `max(|k0|, |k1|)`.
    pub k_max: f64,
    /// Grid location of the curvature maximum.
    pub k_max_x: f64,
    /// Smallest neck radius (None when the profile has no neck).
    pub r_min: Option<f64>,
    /// Smallest interior value of `psi`.
    pub psi_min: f64,
    /// Location of the leftmost bump, when any.
    pub x_minus: Option<f64>,
    /// Location of the rightmost bump, when any.
    pub x_plus: Option<f64>,
    /// `psi` at the leftmost bump.
    pub psi_x_minus: Option<f64>,
    /// `psi` at the rightmost bump.
    pub psi_x_plus: Option<f64>,
    /// Number of interior local maxima of `psi`.
    pub bump_count: usize,
    /// Number of interior local minima of `psi`.
    pub neck_count: usize,
    /// Largest interior `|psi_s|`.
    pub max_abs_slope: f64,
    /// Smallest scalar curvature over the grid.
    pub min_scalar: f64,
    /// Largest `(1 - psi_s^2)` over the interior (`= sup k1 * psi^2`).
    pub sup_k1_psi2: f64,
    /// Largest `max(|k0|,|k1|) * psi^2` over the interior.
    pub sup_rm_psi2: f64,
    /// Neck pinching functional `max K / (L (log L + 2 - log L_min(0)))`
    /// over points with `psi_ss > 0`, where `K = psi_ss/psi`, `L = k1`.
    /// None when no point qualifies or the monitor is disabled.
    pub pinching: Option<f64>,
}

/// Aggregated invariant-monitor outcome of a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InvariantSummary {
    /// Number of accepted states observed (including the initial one).
    pub checked_states: u64,
    /// Accepted states with interior `|psi_s| > 1 + slope_tol`.
    pub slope_violations: u64,
    /// Accepted states whose minimum scalar curvature was nonpositive while
    /// the initial state had it positive.
    pub scalar_violations: u64,
    /// Accepted states whose bump count exceeded the previous state's.
    pub bump_violations: u64,
    /// Accepted states where the pinching functional exceeded its bound or
    /// went non-finite.
    pub pinching_violations: u64,
    /// Accepted states whose one-sided pole slopes drifted beyond the
    /// closure tolerance (sphere mode only).
    pub closure_violations: u64,
    /// Largest interior `|psi_s|` seen over the run.
    pub sup_abs_slope: f64,
    /// Largest `1 - psi_s^2` seen over the run.
    pub sup_k1_psi2: f64,
    /// Largest `max(|k0|,|k1|) psi^2` seen over the run.
    pub sup_rm_psi2: f64,
    /// Largest pinching value seen, when the monitor was ever active.
    pub sup_pinching: Option<f64>,
    /// Smallest scalar curvature seen over the run.
    pub min_scalar_seen: f64,
    /// Whether the scalar-positivity monitor was armed (initial min R > 0).
    pub scalar_monitor_armed: bool,
    /// Smallest `k1` of the initial state (reference level for pinching).
    pub initial_k1_min: f64,
    /// Bump count of the initial state.
    pub initial_bump_count: usize,
    /// Bump count of the final state.
    pub final_bump_count: usize,
    /// Total violations across all monitors.
    pub total_violations: u64,
}

impl InvariantSummary {
    fn total(&self) -> u64 {
        self.slope_violations
            + self.scalar_violations
            + self.bump_violations
            + self.pinching_violations
            + self.closure_violations
    }
}

/// Complete result of a flow run.
#[derive(Debug, Clone)]
pub struct FlowRun {
    /// Configuration the run used.
    pub config: SolverConfig,
    /// Initial state (validated copy).
    pub initial: Profile,
    /// Last accepted state.
    pub final_profile: Profile,
    /// Time series of observables, one per `record_stride` accepted steps
    /// (always includes the initial and final states).
    pub series: Vec<SeriesRecord>,
    /// Stored full states: stride-sampled over the whole run plus the last
    /// 64 accepted states, ordered by time, ending with the final state.
    pub snapshots: Vec<Profile>,
    /// Why the run stopped.
    pub termination: Termination,
    /// Number of accepted steps.
    pub steps_accepted: u64,
    /// Number of rejected step attempts.
    pub steps_rejected: u64,
    /// Monitor outcome.
    pub invariants: InvariantSummary,
}

/// Observation of a single state: series record plus monitor inputs.
struct Observation {
    record: SeriesRecord,
    dt_limit: f64,
    closure_drift_ok: bool,
}

/// Preallocated buffers for the RK4 stages and observations.
struct Workspace {
    w: Vec<f64>,
    wx: Vec<f64>,
    dphi: [Vec<f64>; 4],
    dpsi: [Vec<f64>; 4],
    phi_mid: Vec<f64>,
    psi_mid: Vec<f64>,
    phi_new: Vec<f64>,
    psi_new: Vec<f64>,
}

impl Workspace {
    fn new(m: usize) -> Self {
        let z = || vec![0.0; m];
        Workspace {
            w: z(),
            wx: z(),
            dphi: [z(), z(), z(), z()],
            dpsi: [z(), z(), z(), z()],
            phi_mid: z(),
            psi_mid: z(),
            phi_new: z(),
            psi_new: z(),
        }
    }
}

/// Right-hand side of the flow at one state. Fills `out_phi`, `out_psi`;
/// uses `w`, `wx` as derivative scratch. Returns false when the state is too
/// degenerate to evaluate (non-finite values appeared).
fn flow_rhs(
    boundary: BoundaryMode,
    n: usize,
    dx: f64,
    phi: &[f64],
    psi: &[f64],
    w: &mut [f64],
    wx: &mut [f64],
    out_phi: &mut [f64],
    out_psi: &mut [f64],
) -> bool {
    let m = psi.len();
    let nf = n as f64;
    geometric_derivatives_into(boundary, psi, phi, dx, w, wx);
    let (lo, hi) = match boundary {
        BoundaryMode::SpherePoles => (1, m - 1),
        _ => (0, m),
    };
    let mut ok = true;
    for i in lo..hi {
        let ratio = wx[i] / psi[i];
        out_psi[i] = wx[i] - (nf - 1.0) * (1.0 - w[i] * w[i]) / psi[i];
        out_phi[i] = nf * ratio * phi[i];
        ok &= out_psi[i].is_finite() && out_phi[i].is_finite();
    }
    if boundary == BoundaryMode::SpherePoles {
        // Fourth-difference dissipation on psi. The composed first-derivative
        // Laplacian is blind to the odd-even (checkerboard) mode, which the
        // reaction term then feeds near the poles where psi -> 0; an O(dx^2)
        // background dissipation removes exactly that mode (damping rate
        // CHECKERBOARD_DISSIPATION / (phi dx)^2 at the grid scale) while
        // staying at the scheme's own truncation order on smooth data.
        //
        // The difference is taken in arclength, not grid index: the five
        // stencil weights are the exact fourth-derivative weights for the
        // local arclength positions (weight of node k is 4! / prod of its
        // position differences), so the operator annihilates cubics of
        // arclength on any spacing. On a uniform mesh this reduces exactly
        // to [1,-4,6,-4,1] / spacing^4. An index-space difference instead
        // leaves an O(grading^3) residual on profiles that are linear in
        // arclength -- near a pole, where the slope is already +-1, that
        // residual acts as a steady spurious flux on the tightest rows and
        // can push the slope past its bound while a cap collapses.
        //
        // Ghosts: psi[0] = 0 with odd reflection across each pole, at the
        // mirrored arclength position.
        let damp_scale = |phi_i: f64| {
            CHECKERBOARD_DISSIPATION * (phi_i * dx) * (phi_i * dx) / 16.0
        };
        // Five-point fourth-derivative weights for gap lengths g1..g4
        // between consecutive nodes (node positions 0, g1, g1+g2, ...).
        let d4_weights = |g1: f64, g2: f64, g3: f64, g4: f64| -> [f64; 5] {
            let s0 = 0.0;
            let s1 = g1;
            let s2 = g1 + g2;
            let s3 = s2 + g3;
            let s4 = s3 + g4;
            let s = [s0, s1, s2, s3, s4];
            let mut wts = [0.0; 5];
            for k in 0..5 {
                let mut prod = 1.0;
                for l in 0..5 {
                    if l != k {
                        prod *= s[k] - s[l];
                    }
                }
                wts[k] = 24.0 / prod;
            }
            wts
        };
        let gap = |a: usize, b: usize| 0.5 * (phi[a] + phi[b]) * dx;
        // Row 1: nodes {ghost(-1), pole, 1, 2, 3}; the ghost mirrors row 1.
        {
            let g1 = gap(0, 1);
            let wts = d4_weights(g1, g1, gap(1, 2), gap(2, 3));
            let diff = wts[0] * (-psi[1]) + wts[2] * psi[1] + wts[3] * psi[2] + wts[4] * psi[3];
            out_psi[1] -= damp_scale(phi[1]) * diff;
            let diff_p = wts[0] * phi[1] + wts[1] * phi[0] + wts[2] * phi[1]
                + wts[3] * phi[2]
                + wts[4] * phi[3];
            out_phi[1] -= damp_scale(phi[1]) * diff_p;
        }
        for i in 2..m - 2 {
            let wts = d4_weights(gap(i - 2, i - 1), gap(i - 1, i), gap(i, i + 1), gap(i + 1, i + 2));
            let diff = wts[0] * psi[i - 2]
                + wts[1] * psi[i - 1]
                + wts[2] * psi[i]
                + wts[3] * psi[i + 1]
                + wts[4] * psi[i + 2];
            out_psi[i] -= damp_scale(phi[i]) * diff;
            // The lapse needs the same treatment: its equation is pointwise
            // and its linearization near a pole is advection out of the pole
            // with speed ~ n/s, whose central discretization carries
            // undamped dispersive grid waves (measured growth up to
            // ~ 0.2 / (phi dx)^2 on a round sphere).
            let diff_p = wts[0] * phi[i - 2]
                + wts[1] * phi[i - 1]
                + wts[2] * phi[i]
                + wts[3] * phi[i + 1]
                + wts[4] * phi[i + 2];
            out_phi[i] -= damp_scale(phi[i]) * diff_p;
        }
        // Row m-2: nodes {m-4, m-3, m-2, pole, ghost}; the ghost mirrors m-2.
        {
            let g4 = gap(m - 2, m - 1);
            let wts = d4_weights(gap(m - 4, m - 3), gap(m - 3, m - 2), g4, g4);
            let diff = wts[0] * psi[m - 4] + wts[1] * psi[m - 3] + wts[2] * psi[m - 2]
                + wts[4] * (-psi[m - 2]);
            out_psi[m - 2] -= damp_scale(phi[m - 2]) * diff;
            let diff_p = wts[0] * phi[m - 4]
                + wts[1] * phi[m - 3]
                + wts[2] * phi[m - 2]
                + wts[3] * phi[m - 1]
                + wts[4] * phi[m - 2];
            out_phi[m - 2] -= damp_scale(phi[m - 2]) * diff_p;
        }
    }
    if boundary == BoundaryMode::SpherePoles {
        // The three rows nearest each pole cannot drive the lapse from their
        // own psi_ss/psi reads: the ratio is 0/0 at the pole and its noise
        // amplification ~ 1/(psi_j (phi dx)^2) makes the local feedback
        // linearly unstable (measured growth ~ 0.16/(phi dx)^2). They follow
        // the relative drive read at the fourth row instead, whose stencil
        // reaches only free rows, so the slaved values never feed their own
        // drive within a step; the read differs from the limit ratio by
        // O((phi dx)^2), keeping the scheme second order.
        out_psi[0] = 0.0;
        out_psi[m - 1] = 0.0;
        for (pole, step) in [(0usize, 1isize), (m - 1, -1isize)] {
            let at = |k: isize| (pole as isize + step * k) as usize;
            let q = out_phi[at(4)] / phi[at(4)];
            for j in 0..3 {
                let i = at(j);
                out_phi[i] = q * phi[i];
                ok &= out_phi[i].is_finite();
            }
        }
    }
    ok
}

/// Why a step attempt was rejected.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Reject {
    NonFinite,
    PsiFloor { index: usize, value: f64 },
    Slope { value: f64 },
}

/// Outcome of the acceptance checks on a candidate state.
fn check_candidate(
    boundary: BoundaryMode,
    phi: &[f64],
    psi: &[f64],
    psi_floor: f64,
    slope_tol: f64,
    dx: f64,
    w: &mut [f64],
    wx: &mut [f64],
) -> Result<(), Reject> {
    let m = psi.len();
    for i in 0..m {
        if !phi[i].is_finite() || !psi[i].is_finite() || phi[i] <= 0.0 {
            return Err(Reject::NonFinite);
        }
    }
    let (lo, hi) = interior_range(boundary, m);
    for i in lo..hi {
        if psi[i] <= psi_floor {
            return Err(Reject::PsiFloor { index: i, value: psi[i] });
        }
    }
    geometric_derivatives_into(boundary, psi, phi, dx, w, wx);
    let mut worst = 0.0_f64;
    for i in 1..m - 1 {
        worst = worst.max(w[i].abs());
    }
    if worst > 1.0 + slope_tol {
        return Err(Reject::Slope { value: worst });
    }
    Ok(())
}

fn interior_range(boundary: BoundaryMode, m: usize) -> (usize, usize) {
    match boundary {
        BoundaryMode::SpherePoles => (1, m - 1),
        _ => (0, m),
    }
}

/// Observe one state: curvature extrema, features, monitors, step limit.
fn observe(state: &Profile, step: u64, dt: f64, k1_min0: f64, ws: &mut Workspace) -> Observation {
    let m = state.len();
    let nf = state.n as f64;
    let dx = state.dx();
    geometric_derivatives_into(state.boundary, &state.psi, &state.phi, dx, &mut ws.w, &mut ws.wx);
    let (lo, hi) = interior_range(state.boundary, m);

    let mut k_max = f64::NEG_INFINITY;
    let mut k_max_x = state.x[lo];
    let mut psi_min = f64::INFINITY;
    let mut max_abs_slope = 0.0_f64;
    let mut min_scalar = f64::INFINITY;
    let mut sup_k1_psi2 = f64::NEG_INFINITY;
    let mut sup_rm_psi2 = f64::NEG_INFINITY;
    let mut pinching: Option<f64> = None;
    let mut k0_near = [0.0_f64; 3]; // for pole extrapolation of scalar curvature

    let log_ref = if k1_min0 > 0.0 { k1_min0.ln() } else { f64::NAN };
    for i in lo..hi {
        let psi = state.psi[i];
        let w = ws.w[i];
        let wxv = ws.wx[i];
        let k0 = -wxv / psi;
        let one_minus_w2 = 1.0 - w * w;
        let k1 = one_minus_w2 / (psi * psi);
        let rm = k0.abs().max(k1.abs());
        if rm > k_max {
            k_max = rm;
            k_max_x = state.x[i];
        }
        if psi < psi_min {
            psi_min = psi;
        }
        if i > 0 && i < m - 1 {
            let a = w.abs();
            if a > max_abs_slope {
                max_abs_slope = a;
            }
        }
        let scal = 2.0 * nf * k0 + nf * (nf - 1.0) * k1;
        if scal < min_scalar {
            min_scalar = scal;
        }
        if one_minus_w2 > sup_k1_psi2 {
            sup_k1_psi2 = one_minus_w2;
        }
        let rmp = rm * psi * psi;
        if rmp > sup_rm_psi2 {
            sup_rm_psi2 = rmp;
        }
        if k1_min0 > 0.0 && wxv > 0.0 && k1 > 0.0 {
            let weight = k1.ln() + 2.0 - log_ref;
            if weight > 0.0 {
                let val = (wxv / psi) / (k1 * weight);
                pinching = Some(pinching.map_or(val, |p: f64| p.max(val)));
            }
        }
        if state.boundary == BoundaryMode::SpherePoles && i >= 1 && i <= 3 {
            k0_near[i - 1] = k0;
        }
    }
    // Sphere poles: extrapolate k0 (k1 agrees there) to complete the scalar
    // and curvature-magnitude extrema.
    let mut closure_drift_ok = true;
    if state.boundary == BoundaryMode::SpherePoles {
        let kl = 3.0 * k0_near[0] - 3.0 * k0_near[1] + k0_near[2];
        let mut k0r = [0.0_f64; 3];
        for (j, slot) in k0r.iter_mut().enumerate() {
            let i = m - 2 - j;
            *slot = -ws.wx[i] / state.psi[i];
        }
        let kr = 3.0 * k0r[0] - 3.0 * k0r[1] + k0r[2];
        for (pole_idx, kpole) in [(0usize, kl), (m - 1, kr)] {
            let rm = kpole.abs();
            if rm > k_max {
                k_max = rm;
                k_max_x = state.x[pole_idx];
            }
            let scal = 2.0 * nf * kpole + nf * (nf - 1.0) * kpole;
            if scal < min_scalar {
                min_scalar = scal;
            }
        }
        // Closure drift: one-sided slopes vs +-1, tolerance scaled by the
        // local truncation error (pole spacing squared times curvature).
        let sl = (-3.0 * state.psi[0] + 4.0 * state.psi[1] - state.psi[2])
            / (2.0 * dx * state.phi[0]);
        let sr = (3.0 * state.psi[m - 1] - 4.0 * state.psi[m - 2] + state.psi[m - 3])
            / (2.0 * dx * state.phi[m - 1]);
        let tol_l = 1e-8 + 100.0 * (state.phi[0] * dx).powi(2) * kl.abs().max(1.0);
        let tol_r = 1e-8 + 100.0 * (state.phi[m - 1] * dx).powi(2) * kr.abs().max(1.0);
        closure_drift_ok = (sl - 1.0).abs() <= tol_l && (sr + 1.0).abs() <= tol_r;
    }

    let feats: Features = detect_features(state);
    let (r_min, x_minus, x_plus, psi_xm, psi_xp) = (
        feats.r_min,
        feats.x_minus,
        feats.x_plus,
        feats.psi_at_x_minus,
        feats.psi_at_x_plus,
    );

    // Adaptive step limit from this state.
    let mut min_phi = f64::INFINITY;
    for &p in &state.phi {
        if p < min_phi {
            min_phi = p;
        }
    }
    let diffusion = (min_phi * dx) * (min_phi * dx) / 2.0;
    let reaction = 1.0 / ((nf - 1.0) * k_max.max(1e-300));
    let dt_limit = diffusion.min(reaction);

    Observation {
        record: SeriesRecord {
            step,
            t: state.t,
            dt,
            k_max,
            k_max_x,
            r_min,
            psi_min,
            x_minus,
            x_plus,
            psi_x_minus: psi_xm,
            psi_x_plus: psi_xp,
            bump_count: feats.bumps.len(),
            neck_count: feats.necks.len(),
            max_abs_slope,
            min_scalar,
            sup_k1_psi2,
            sup_rm_psi2,
            pinching,
        },
        dt_limit,
        closure_drift_ok,
    }
}

/// Evolve `initial` under the flow until a stopping condition fires.
pub fn run(initial: &Profile, config: &SolverConfig) -> Result<FlowRun, FlowError> {
    let m = initial.len();
    if m < 9 {
        return Err(FlowError::InvalidInput(format!(
            "flow solver needs at least 9 grid points, got {m}"
        )));
    }
    if !(config.cfl_safety > 0.0 && config.cfl_safety <= 1.0) {
        return Err(FlowError::config("solver.cfl_safety", "must lie in (0, 1]"));
    }
    if config.k_stop <= 0.0 {
        return Err(FlowError::config("solver.k_stop", "must be positive"));
    }
    if let Some(tm) = config.t_max {
        if !(tm > initial.t) {
            return Err(FlowError::config(
                "solver.t_max",
                format!("must exceed the initial time {}", initial.t),
            ));
        }
    }
    let dx = initial.dx();
    let nf = initial.n as f64;
    let boundary = initial.boundary;
    let psi_floor = config.psi_floor_rel * initial.psi_max();
    let mut ws = Workspace::new(m);

    // Initial curvature: reference level for the pinching monitor and the
    // curvature scale for the pole-closure tolerance.
    let init_curv = initial.curvature();
    let k1_min0 = init_curv.k1.iter().cloned().fold(f64::INFINITY, f64::min);

    if initial.boundary == BoundaryMode::SpherePoles && config.check_closure {
        // Tolerance tracks the one-sided stencil's truncation error,
        // ds^2 |psi'''| / 3 with |psi'''| ~ |k0| at a pole, with a wide
        // margin; it still catches conical (non-unit-slope) closures.
        let dsl = initial.phi[0] * dx;
        let dsr = initial.phi[m - 1] * dx;
        let kl = init_curv.k0[0].abs().max(1.0);
        let kr = init_curv.k0[m - 1].abs().max(1.0);
        let tol = 1e-6 + 100.0 * (dsl * dsl * kl).max(dsr * dsr * kr);
        initial.check_closure(tol)?;
    }

    let mut state = initial.clone();
    let mut step: u64 = 0;
    let mut rejected: u64 = 0;

    let obs0 = observe(&state, 0, 0.0, k1_min0, &mut ws);
    let scalar_monitor_armed = obs0.record.min_scalar > 0.0;
    let mut inv = InvariantSummary {
        checked_states: 1,
        slope_violations: 0,
        scalar_violations: 0,
        bump_violations: 0,
        pinching_violations: 0,
        closure_violations: 0,
        sup_abs_slope: obs0.record.max_abs_slope,
        sup_k1_psi2: obs0.record.sup_k1_psi2,
        sup_rm_psi2: obs0.record.sup_rm_psi2,
        sup_pinching: obs0.record.pinching,
        min_scalar_seen: obs0.record.min_scalar,
        scalar_monitor_armed,
        initial_k1_min: k1_min0,
        initial_bump_count: obs0.record.bump_count,
        final_bump_count: obs0.record.bump_count,
        total_violations: 0,
    };
    let mut series = vec![obs0.record.clone()];
    let mut prev_bumps = obs0.record.bump_count;
    let mut last_record_step: u64 = 0;

    // Snapshot storage: stride samples (doubling to stay bounded) plus a
    // ring of the last 64 accepted states.
    let mut stride = config.snapshot_stride.max(1);
    let mut strided: Vec<(u64, Profile)> = vec![(0, state.clone())];
    let mut ring: VecDeque<(u64, Profile)> = VecDeque::with_capacity(64);

    let mut k_max = obs0.record.k_max;
    let mut dt_limit = obs0.dt_limit;
    let termination;

    'main: loop {
        if k_max >= config.k_stop {
            termination = Termination::CurvatureCap;
            break;
        }
        if step >= config.max_steps {
            termination = Termination::StepBudget;
            break;
        }
        let mut dt = config.cfl_safety * dt_limit;
        if let Some(tm) = config.t_max {
            let remain = tm - state.t;
            if remain <= 1e-15 * tm.abs().max(1.0) {
                termination = Termination::TMax;
                break;
            }
            if dt > remain {
                dt = remain;
            }
        }

        // Attempt the step, halving on rejection.
        let mut rejects_here: u32 = 0;
        loop {
            let dt_floor = 1e-18 + 1e-15 * state.t.abs();
            if dt <= dt_floor {
                termination = Termination::DtFloor;
                break 'main;
            }
            match try_rk4(&state, dt, boundary, nf, dx, psi_floor, config.slope_reject, &mut ws) {
                Ok(()) => {
                    // ws.phi_new / ws.psi_new hold the accepted state.
                    std::mem::swap(&mut state.phi, &mut ws.phi_new);
                    std::mem::swap(&mut state.psi, &mut ws.psi_new);
                    if boundary == BoundaryMode::SpherePoles {
                        state.psi[0] = 0.0;
                        state.psi[m - 1] = 0.0;
                    }
                    if boundary == BoundaryMode::IntervalPeriodic {
                        state.psi[m - 1] = state.psi[0];
                        state.phi[m - 1] = state.phi[0];
                    }
                    state.t += dt;
                    step += 1;

                    let obs = observe(&state, step, dt, k1_min0, &mut ws);
                    k_max = obs.record.k_max;
                    dt_limit = obs.dt_limit;

                    // Monitors.
                    inv.checked_states += 1;
                    let r = &obs.record;
                    if r.max_abs_slope > 1.0 + config.slope_tol {
                        inv.slope_violations += 1;
                    }
                    if scalar_monitor_armed && r.min_scalar <= 0.0 {
                        inv.scalar_violations += 1;
                    }
                    if r.bump_count > prev_bumps {
                        inv.bump_violations += 1;
                    }
                    prev_bumps = r.bump_count;
                    if let Some(p) = r.pinching {
                        if !p.is_finite() || p > config.pinching_bound {
                            inv.pinching_violations += 1;
                        }
                        inv.sup_pinching =
                            Some(inv.sup_pinching.map_or(p, |s: f64| s.max(p)));
                    }
                    if !obs.closure_drift_ok {
                        inv.closure_violations += 1;
                    }
                    inv.sup_abs_slope = inv.sup_abs_slope.max(r.max_abs_slope);
                    inv.sup_k1_psi2 = inv.sup_k1_psi2.max(r.sup_k1_psi2);
                    inv.sup_rm_psi2 = inv.sup_rm_psi2.max(r.sup_rm_psi2);
                    inv.min_scalar_seen = inv.min_scalar_seen.min(r.min_scalar);
                    inv.final_bump_count = r.bump_count;

                    if config.progress_every > 0 && step % config.progress_every == 0 {
                        eprintln!(
                            "step {step} t={:.8} dt={:.3e} k_max={:.4e} psi_min={:.3e} sup|psi_s|={:.9}",
                            state.t, dt, r.k_max, r.psi_min, r.max_abs_slope
                        );
                    }

                    if step - last_record_step >= config.record_stride {
                        series.push(obs.record);
                        last_record_step = step;
                    }

                    // Snapshots.
                    if step % stride == 0 {
                        strided.push((step, state.clone()));
                        if strided.len() > 1536 {
                            let mut kept = Vec::with_capacity(769);
                            for (idx, item) in strided.drain(..).enumerate() {
                                if idx % 2 == 0 {
                                    kept.push(item);
                                }
                            }
                            strided = kept;
                            stride *= 2;
                        }
                    }
                    if ring.len() == 64 {
                        // Reuse the evicted buffers to avoid reallocation.
                        let (_, mut old) = ring.pop_front().expect("ring nonempty");
                        old.t = state.t;
                        old.phi.copy_from_slice(&state.phi);
                        old.psi.copy_from_slice(&state.psi);
                        ring.push_back((step, old));
                    } else {
                        ring.push_back((step, state.clone()));
                    }
                    break;
                }
                Err(reject) => {
                    rejected += 1;
                    rejects_here += 1;
                    if rejects_here > config.max_rejects {
                        match reject {
                            Reject::PsiFloor { index, value } => {
                                return Err(FlowError::DegenerateInterior {
                                    x: state.x[index],
                                    psi: value,
                                    floor: psi_floor,
                                    t: state.t,
                                });
                            }
                            _ => {
                                termination = Termination::DtFloor;
                                break 'main;
                            }
                        }
                    }
                    dt *= 0.5;
                }
            }
        }
    }

    // Ensure the final state appears in the series even with a record stride.
    if series.last().map(|r| r.step) != Some(step) {
        let obs = observe(&state, step, 0.0, k1_min0, &mut ws);
        series.push(obs.record);
    }

    // Merge snapshots: strided samples plus the trailing ring, by step.
    let mut merged: Vec<(u64, Profile)> = strided;
    for (s, p) in ring {
        merged.push((s, p));
    }
    if merged.last().map(|(s, _)| *s) != Some(step) {
        merged.push((step, state.clone()));
    }
    merged.sort_by_key(|(s, _)| *s);
    merged.dedup_by_key(|(s, _)| *s);
    let snapshots: Vec<Profile> = merged.into_iter().map(|(_, p)| p).collect();

    inv.total_violations = inv.total();

    Ok(FlowRun {
        config: config.clone(),
        initial: initial.clone(),
        final_profile: state,
        series,
        snapshots,
        termination,
        steps_accepted: step,
        steps_rejected: rejected,
        invariants: inv,
    })
}

/// One RK4 attempt. On success the new state is left in `ws.phi_new` /
/// `ws.psi_new`.
#[allow(clippy::too_many_arguments)]

fn try_rk4(
    state: &Profile,
    dt: f64,
    boundary: BoundaryMode,
    nf: f64,
    dx: f64,
    psi_floor: f64,
    slope_tol: f64,
    ws: &mut Workspace,
) -> Result<(), Reject> {
    let m = state.psi.len();
    let n = nf as usize;
    let (phi0, psi0) = (&state.phi, &state.psi);

    // Stage 1.
    let mut ok;
    {
        let (dphi, dpsi) = (&mut ws.dphi, &mut ws.dpsi);
        ok = flow_rhs(boundary, n, dx, phi0, psi0, &mut ws.w, &mut ws.wx, &mut dphi[0], &mut dpsi[0]);
    }
    // Stages 2-4.
    for stage in 1..4 {
        if !ok {
            return Err(Reject::NonFinite);
        }
        let c = if stage == 3 { 1.0 } else { 0.5 };
        let prev = stage - 1;
        let mut degenerate = false;
        for i in 0..m {
            ws.phi_mid[i] = phi0[i] + c * dt * ws.dphi[prev][i];
            ws.psi_mid[i] = psi0[i] + c * dt * ws.dpsi[prev][i];
            if ws.phi_mid[i] <= 0.0 {
                degenerate = true;
            }
        }
        let (lo, hi) = interior_range(boundary, m);
        for i in lo..hi {
            if ws.psi_mid[i] <= 0.0 {
                degenerate = true;
            }
        }
        if degenerate {
            return Err(Reject::NonFinite);
        }
        let (dphi_s, rest) = ws.dphi.split_at_mut(stage);
        let (dpsi_s, rest_p) = ws.dpsi.split_at_mut(stage);
        let _ = dphi_s;
        let _ = dpsi_s;
        ok = flow_rhs(
            boundary,
            n,
            dx,
            &ws.phi_mid,
            &ws.psi_mid,
            &mut ws.w,
            &mut ws.wx,
            &mut rest[0],
            &mut rest_p[0],
        );
    }
    if !ok {
        return Err(Reject::NonFinite);
    }
    for i in 0..m {
        ws.phi_new[i] = phi0[i]
            + dt / 6.0 * (ws.dphi[0][i] + 2.0 * ws.dphi[1][i] + 2.0 * ws.dphi[2][i] + ws.dphi[3][i]);
        ws.psi_new[i] = psi0[i]
            + dt / 6.0 * (ws.dpsi[0][i] + 2.0 * ws.dpsi[1][i] + 2.0 * ws.dpsi[2][i] + ws.dpsi[3][i]);
    }
    check_candidate(boundary, &ws.phi_new, &ws.psi_new, psi_floor, slope_tol, dx, &mut ws.w, &mut ws.wx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{round_cylinder, round_sphere};


    #[test]
    fn sphere_jacobian_has_no_violent_modes() {
        // Matrix-free power iteration on I + tau*J, where J is the Jacobian
        // of the semi-discrete right-hand side linearized at the exact round
        // sphere and tau = hbar^2/4 matches the explicit-step scale. Free
        // coordinates: all of phi, interior psi. The sphere's own dilation
        // mode (delta phi, delta psi) = (phi, psi) grows at lambda = 2/r^2 =
        // 2, so a healthy closure converges to ~2 here. A pole closure that
        // feeds slaved lapse rows back into their own drive instead shows up
        // as lambda from ~10 up to thousands, and such modes dominate the
        // iteration within a few thousand steps. The grids stay coarse on
        // purpose: tau shrinks like hbar^2, so on much finer grids the probe
        // can no longer separate eigenvalues near the physical scale.
        for m in [129usize, 257] {
            let n = 2usize;
            let p = round_sphere(n, 1.0, 0.0, m);
            let dx = p.dx();
            let hbar = p.phi[0] * dx;
            let tau = hbar * hbar / 4.0;
            let nfree = 2 * m - 2;
            let base_phi = p.phi.clone();
            let base_psi = p.psi.clone();
            let mut w = vec![0.0; m];
            let mut wx = vec![0.0; m];
            let mut dphi = vec![0.0; m];
            let mut dpsi = vec![0.0; m];
            let mut php = base_phi.clone();
            let mut psp = base_psi.clone();
            let mut phm = base_phi.clone();
            let mut psm = base_psi.clone();
            let mut fp = vec![0.0; nfree];
            let mut fm = vec![0.0; nfree];
            // Deterministic pseudo-random init, extra weight near the poles.
            let mut v: Vec<f64> = (0..nfree)
                .map(|i| {
                    let u = ((i as f64 * 12.9898).sin() * 43758.5453).fract() - 0.5;
                    let j = if i < m { i.min(m - 1 - i) } else { (i - m + 1).min(m - 2 - (i - m)) };
                    u * (1.0 + 9.0 / (1.0 + j as f64))
                })
                .collect();
            let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            v.iter_mut().for_each(|a| *a /= nv);
            let eps = 1e-7;
            let mut lam = 0.0;
            for _ in 0..8000 {
                for i in 0..m {
                    php[i] = base_phi[i] + eps * v[i];
                    phm[i] = base_phi[i] - eps * v[i];
                }
                psp.copy_from_slice(&base_psi);
                psm.copy_from_slice(&base_psi);
                for i in 1..m - 1 {
                    psp[i] += eps * v[m + i - 1];
                    psm[i] -= eps * v[m + i - 1];
                }
                flow_rhs(BoundaryMode::SpherePoles, n, dx, &php, &psp, &mut w, &mut wx, &mut dphi, &mut dpsi);
                fp[..m].copy_from_slice(&dphi);
                fp[m..].copy_from_slice(&dpsi[1..m - 1]);
                flow_rhs(BoundaryMode::SpherePoles, n, dx, &phm, &psm, &mut w, &mut wx, &mut dphi, &mut dpsi);
                fm[..m].copy_from_slice(&dphi);
                fm[m..].copy_from_slice(&dpsi[1..m - 1]);
                let mut growth = 0.0;
                for i in 0..nfree {
                    let jv = (fp[i] - fm[i]) / (2.0 * eps);
                    v[i] += tau * jv;
                    growth += v[i] * v[i];
                }
                let g = growth.sqrt();
                lam = (g - 1.0) / tau;
                v.iter_mut().for_each(|a| *a /= g);
            }
            assert!(lam < 3.5, "m={m}: dominant growth rate {lam:.3}, want ~2 (dilation mode)");
            assert!(lam > 0.5, "m={m}: power iteration lost the dilation mode, lambda = {lam:.3}");
        }
    }

    #[test]
    fn cylinder_follows_exact_law() {
        // psi^2 = r0^2 - 2(n-1)t exactly on the homogeneous cylinder.
        let p = round_cylinder(2, 1.0, 0.0, 65, BoundaryMode::IntervalPeriodic);
        let cfg = SolverConfig { t_max: Some(0.3), ..Default::default() };
        let run = run(&p, &cfg).unwrap();
        assert_eq!(run.termination, Termination::TMax);
        let t = run.final_profile.t;
        let expect = (1.0 - 2.0 * t).sqrt();
        for &v in &run.final_profile.psi {
            assert!((v - expect).abs() < 1e-10, "psi = {v}, expect {expect}");
        }
        // phi does not move on a cylinder.
        for &v in &run.final_profile.phi {
            assert!((v - 1.0).abs() < 1e-12);
        }
        assert_eq!(run.invariants.total_violations, 0);
    }

    #[test]
    fn sphere_shrinks_self_similarly() {
        let p = round_sphere(2, 1.0, 0.0, 129);
        let cfg = SolverConfig { t_max: Some(0.1), ..Default::default() };
        let run = run(&p, &cfg).unwrap();
        let t = run.final_profile.t;
        let r = (1.0 - 4.0 * t).sqrt();
        let mut worst = 0.0_f64;
        for (i, &v) in run.final_profile.psi.iter().enumerate() {
            let exact = r * (std::f64::consts::FRAC_PI_2 * run.final_profile.x[i]).cos();
            worst = worst.max((v - exact).abs());
        }
        assert!(worst / r < 2e-3, "relative error {:.2e}", worst / r);
        assert_eq!(run.invariants.total_violations, 0);
    }

    #[test]
    fn curvature_cap_fires_on_shrinking_sphere() {
        let p = round_sphere(2, 1.0, 0.0, 129);
        let cfg = SolverConfig { k_stop: 50.0, t_max: Some(10.0), ..Default::default() };
        let run = run(&p, &cfg).unwrap();
        assert_eq!(run.termination, Termination::CurvatureCap);
        // K = 1/r^2 = 1/(1-4t) >= 50 at t >= 0.245.
        assert!(run.final_profile.t > 0.24 && run.final_profile.t < 0.25);
    }

    #[test]
    fn determinism_is_bitwise() {
        let p = round_sphere(2, 1.0, 0.0, 65);
        let cfg = SolverConfig { t_max: Some(0.05), ..Default::default() };
        let a = run(&p, &cfg).unwrap();
        let b = run(&p, &cfg).unwrap();
        assert_eq!(a.steps_accepted, b.steps_accepted);
        assert_eq!(a.final_profile.psi, b.final_profile.psi);
        assert_eq!(a.final_profile.phi, b.final_profile.phi);
        let ka: Vec<f64> = a.series.iter().map(|r| r.k_max).collect();
        let kb: Vec<f64> = b.series.iter().map(|r| r.k_max).collect();
        assert_eq!(ka, kb);
    }

    #[test]
    fn snapshots_are_time_ordered_and_end_at_final() {
        let p = round_sphere(2, 1.0, 0.0, 65);
        let cfg = SolverConfig { t_max: Some(0.05), ..Default::default() };
        let r = run(&p, &cfg).unwrap();
        assert!(r.snapshots.len() >= 2);
        for w in r.snapshots.windows(2) {
            assert!(w[0].t < w[1].t);
        }
        let last = r.snapshots.last().unwrap();
        assert_eq!(last.t, r.final_profile.t);
        assert_eq!(last.psi, r.final_profile.psi);
    }
}
