//! Neck/bump structure, blow-up time estimation, singularity classification,
//! and parabolic rescaling about a pivot point.
//!
//! The classifier's statistic is the normalized blow-up ratio
//! `rho(t) = (T_est - t) * K_max(t)`: bounded along the whole run for a
//! type-I (curvature like `1/(T-t)`) singularity, divergent for faster,
//! type-II blow-up. `T_est` comes from a least-squares fit of `1/K_max`
//! against `t` over the trailing window where `K_max` grows by its last
//! decade; for convex `1/K` histories that fit *underestimates* the true
//! blow-up time, which only strengthens the divergence of `rho` in the
//! type-II case.

use crate::error::FlowError;
use crate::profile::{BoundaryMode, Profile};
use crate::solver::{FlowRun, SeriesRecord, Termination};
use serde::{Deserialize, Serialize};

// ---------------------------------------------------------------------------
// Feature detection
// ---------------------------------------------------------------------------

/// One interior extremum of `psi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeaturePoint {
    /// Grid index.
    pub index: usize,
    /// Grid coordinate.
    pub x: f64,
    /// Profile value there.
    pub psi: f64,
}

/// Bump/neck structure of a profile.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Features {
    /// Interior local maxima of `psi`, left to right.
    pub bumps: Vec<FeaturePoint>,
    /// Interior local minima of `psi`, left to right.
    pub necks: Vec<FeaturePoint>,
    /// Smallest neck value (None when there is no neck).
    pub r_min: Option<f64>,
    /// Grid index of the smallest neck.
    pub r_min_index: Option<usize>,
    /// Location of the leftmost bump.
    pub x_minus: Option<f64>,
    /// Location of the rightmost bump.
    pub x_plus: Option<f64>,
    /// `psi` at the leftmost bump.
    pub psi_at_x_minus: Option<f64>,
    /// `psi` at the rightmost bump.
    pub psi_at_x_plus: Option<f64>,
}

/// Locate interior local maxima (bumps) and minima (necks) of `psi` by sign
/// changes of its forward differences. Runs of near-zero differences (below
/// `1e-12 * max psi`) are merged into plateaus; a sign change across a
/// plateau yields one feature at the plateau's midpoint. Seam-straddling
/// features of periodic profiles are not scanned for.
pub fn detect_features(p: &Profile) -> Features {
    let m = p.len();
    let psi = &p.psi;
    let scale = p.psi_max();
    let ztol = 1e-12 * scale;

    let mut feats = Features::default();
    // Last nonzero difference sign and the diff index where it occurred.
    let mut last_sign = 0i8;
    let mut last_idx = 0usize;
    for i in 0..m - 1 {
        let d = psi[i + 1] - psi[i];
        let s: i8 = if d > ztol {
            1
        } else if d < -ztol {
            -1
        } else {
            0
        };
        if s == 0 {
            continue;
        }
        if last_sign != 0 && s != last_sign {
            // Transition between diff indices last_idx and i: the extremum
            // spans points last_idx+1 ..= i; take the midpoint.
            let idx = (last_idx + 1 + i) / 2;
            let fp = FeaturePoint { index: idx, x: p.x[idx], psi: psi[idx] };
            if last_sign > 0 {
                feats.bumps.push(fp);
            } else {
                feats.necks.push(fp);
            }
        }
        last_sign = s;
        last_idx = i;
    }

    for neck in &feats.necks {
        if feats.r_min.map_or(true, |r| neck.psi < r) {
            feats.r_min = Some(neck.psi);
            feats.r_min_index = Some(neck.index);
        }
    }
    if let Some(first) = feats.bumps.first() {
        feats.x_minus = Some(first.x);
        feats.psi_at_x_minus = Some(first.psi);
    }
    if let Some(last) = feats.bumps.last() {
        feats.x_plus = Some(last.x);
        feats.psi_at_x_plus = Some(last.psi);
    }
    feats
}

// ---------------------------------------------------------------------------
// Blow-up time estimation
// ---------------------------------------------------------------------------

/// Result of fitting the blow-up time from a curvature history.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TEstimate {
    /// Fitted blow-up time.
    pub t_est: f64,
    /// Fit-quality width: rms residual of the linear fit of `1/K_max`
    /// divided by the fitted slope magnitude (time units).
    pub width: f64,
    /// Fitted slope of `1/K_max` against `t` (negative while blowing up).
    pub slope: f64,
    /// Number of records in the fit window.
    pub window_len: usize,
    /// Time of the first record in the fit window.
    pub t_window_start: f64,
    /// Time of the last record used.
    pub t_last: f64,
}

/// Fit the blow-up time from the trailing records where `K_max` climbs
/// through its final decade: least squares of `y = 1/K_max` against `t`,
/// extrapolated to `y = 0`.
///
/// Errors with [`FlowError::NotBlowingUp`] when the window has fewer than
/// `min_records` records, `K_max` is not nondecreasing with real growth in
/// the window, or the fitted line does not cross zero ahead of the data.
pub fn estimate_t(series: &[SeriesRecord], min_records: usize) -> Result<TEstimate, FlowError> {
    let n = series.len();
    if n < min_records.max(3) {
        return Err(FlowError::NotBlowingUp {
            reason: format!("only {n} records, need {}", min_records.max(3)),
        });
    }
    let k_last = series[n - 1].k_max;
    if !(k_last.is_finite() && k_last > 0.0) {
        return Err(FlowError::NotBlowingUp { reason: format!("final K_max = {k_last}") });
    }
    // Trailing window: K_max >= k_last / 10.
    let mut start = n - 1;
    while start > 0 && series[start - 1].k_max >= k_last / 10.0 {
        start -= 1;
    }
    let window = &series[start..];
    if window.len() < min_records {
        return Err(FlowError::NotBlowingUp {
            reason: format!(
                "final-decade window has {} records, need {min_records}",
                window.len()
            ),
        });
    }
    let k_first = window[0].k_max;
    if k_last < 2.0 * k_first {
        return Err(FlowError::NotBlowingUp {
            reason: format!(
                "K_max grew only {:.3}x across the fit window",
                k_last / k_first
            ),
        });
    }
    for w in window.windows(2) {
        if w[1].k_max < w[0].k_max * (1.0 - 1e-9) {
            return Err(FlowError::NotBlowingUp {
                reason: format!("K_max not monotone at t = {:.6e}", w[1].t),
            });
        }
    }
    // Least squares y = a + b t with y = 1/K_max, in shifted time for
    // conditioning.
    let t0 = window[0].t;
    let len = window.len() as f64;
    let (mut st, mut sy, mut stt, mut sty) = (0.0, 0.0, 0.0, 0.0);
    for r in window {
        let tt = r.t - t0;
        let y = 1.0 / r.k_max;
        st += tt;
        sy += y;
        stt += tt * tt;
        sty += tt * y;
    }
    let det = len * stt - st * st;
    if det <= 0.0 {
        return Err(FlowError::NotBlowingUp { reason: "degenerate time window".into() });
    }
    let b = (len * sty - st * sy) / det;
    let a = (sy - b * st) / len;
    if b >= 0.0 {
        return Err(FlowError::NotBlowingUp {
            reason: format!("1/K_max is not decreasing (slope {b:.3e})"),
        });
    }
    let t_est = t0 - a / b;
    let t_last = window[window.len() - 1].t;
    if t_est <= t_last {
        return Err(FlowError::NotBlowingUp {
            reason: format!("fitted blow-up time {t_est:.6e} does not lie ahead of the data"),
        });
    }
    let mut ss = 0.0;
    for r in window {
        let resid = 1.0 / r.k_max - (a + b * (r.t - t0));
        ss += resid * resid;
    }
    let width = (ss / len).sqrt() / b.abs();
    Ok(TEstimate {
        t_est,
        width,
        slope: b,
        window_len: window.len(),
        t_window_start: t0,
        t_last,
    })
}

/// The normalized blow-up ratio `rho = (t_est - t) * K_max` for every record
/// with `t < t_est`, as `(t, rho)` pairs.
pub fn ratio_series(series: &[SeriesRecord], t_est: f64) -> Vec<(f64, f64)> {
    series
        .iter()
        .filter(|r| r.t < t_est)
        .map(|r| (r.t, (t_est - r.t) * r.k_max))
        .collect()
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

/// Singularity-type verdict for a flow run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// The whole manifold shrinks to a round point.
    RoundPoint,
    /// A neck collapses at the type-I rate while the two sides survive.
    TypeINeckpinch,
    /// The blow-up ratio diverges: candidate for type-II behaviour.
    TypeIiCandidate,
    /// None of the signatures matched (or the run did not blow up).
    Unresolved,
}

impl Verdict {
    /// Token used in CSV output.
    pub fn token(self) -> &'static str {
        match self {
            Verdict::RoundPoint => "round_point",
            Verdict::TypeINeckpinch => "type_I_neckpinch",
            Verdict::TypeIiCandidate => "type_II_candidate",
            Verdict::Unresolved => "unresolved",
        }
    }
}

/// Thresholds used by [`classify`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    /// The ratio cap is this factor times the early-run median of `rho`.
    pub ratio_cap_factor: f64,
    /// A neck counts as collapsed when `r_min` falls below this fraction of
    /// its initial value.
    pub collapse_ratio: f64,
    /// Both outermost bumps must retain at least this fraction of their
    /// initial height for a neckpinch verdict.
    pub cap_retention: f64,
    /// Roundness threshold: `min/max` of pointwise curvature magnitude at
    /// the final state must reach this.
    pub round_ratio_min: f64,
    /// Roundness threshold: sup-norm mismatch against the best-fit round
    /// profile, relative to its amplitude.
    pub round_shape_tol: f64,
    /// Minimum records in the blow-up fit window.
    pub min_fit_records: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            ratio_cap_factor: 10.0,
            collapse_ratio: 1e-2,
            cap_retention: 0.25,
            round_ratio_min: 0.9,
            round_shape_tol: 0.05,
            min_fit_records: 10,
        }
    }
}

/// Full evidence trail of a classification.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SingularityReport {
    /// The verdict.
    pub verdict: Verdict,
    /// Why the run stopped.
    pub termination: Termination,
    /// Fitted blow-up time, when the fit succeeded.
    pub t_est: Option<f64>,
    /// Fit-quality width of `t_est`.
    pub t_est_width: Option<f64>,
    /// Maximum of `rho = (t_est - t) K_max` over the run.
    pub max_ratio: Option<f64>,
    /// `rho` at the last record.
    pub ratio_last: Option<f64>,
    /// Median of `rho` over the first half of the run's time span.
    pub ratio_median_early: Option<f64>,
    /// The cap `ratio_cap_factor * ratio_median_early`.
    pub ratio_cap: Option<f64>,
    /// Fraction through the series (by index) where `rho` peaks.
    pub ratio_argmax_frac: Option<f64>,
    /// `min/max` pointwise curvature magnitude at the final state.
    pub round_k_ratio: Option<f64>,
    /// Relative sup mismatch of the final state against a round profile.
    pub round_shape_err: Option<f64>,
    /// Initial smallest neck value.
    pub r_min_initial: Option<f64>,
    /// Final smallest neck value.
    pub r_min_final: Option<f64>,
    /// Final/initial height of the leftmost bump.
    pub retention_left: Option<f64>,
    /// Final/initial height of the rightmost bump.
    pub retention_right: Option<f64>,
    /// Human-readable reasons for the verdict.
    pub evidence: Vec<String>,
}

/// Classify the singularity a run is developing.
///
/// Order of tests: round point, type-I neckpinch, type-II candidate,
/// otherwise unresolved. Runs that did not stop on the curvature cap are
/// reported unresolved (with the fit still attempted for the record).
pub fn classify(run: &FlowRun, cfg: &ClassifierConfig) -> SingularityReport {
    let series = &run.series;
    let mut report = SingularityReport {
        verdict: Verdict::Unresolved,
        termination: run.termination,
        t_est: None,
        t_est_width: None,
        max_ratio: None,
        ratio_last: None,
        ratio_median_early: None,
        ratio_cap: None,
        ratio_argmax_frac: None,
        round_k_ratio: None,
        round_shape_err: None,
        r_min_initial: series.first().and_then(|r| r.r_min),
        r_min_final: series.last().and_then(|r| r.r_min),
        retention_left: None,
        retention_right: None,
        evidence: Vec::new(),
    };

    let fit = estimate_t(series, cfg.min_fit_records);
    match &fit {
        Ok(f) => {
            report.t_est = Some(f.t_est);
            report.t_est_width = Some(f.width);
            let rho = ratio_series(series, f.t_est);
            if !rho.is_empty() {
                let mut max_ratio = f64::NEG_INFINITY;
                let mut argmax = 0usize;
                for (i, &(_, r)) in rho.iter().enumerate() {
                    if r > max_ratio {
                        max_ratio = r;
                        argmax = i;
                    }
                }
                report.max_ratio = Some(max_ratio);
                report.ratio_last = Some(rho[rho.len() - 1].1);
                report.ratio_argmax_frac = Some(argmax as f64 / (rho.len() - 1).max(1) as f64);
                let t_last = rho[rho.len() - 1].0;
                let t_first = rho[0].0;
                let t_half = t_first + 0.5 * (t_last - t_first);
                let mut early: Vec<f64> =
                    rho.iter().filter(|(t, _)| *t <= t_half).map(|&(_, r)| r).collect();
                if !early.is_empty() {
                    early.sort_by(|a, b| a.partial_cmp(b).expect("finite ratios"));
                    let med = early[early.len() / 2];
                    report.ratio_median_early = Some(med);
                    report.ratio_cap = Some(cfg.ratio_cap_factor * med);
                }
            }
        }
        Err(e) => {
            report.evidence.push(format!("blow-up fit failed: {e}"));
        }
    }

    if run.termination != Termination::CurvatureCap {
        report.evidence.push(format!(
            "run stopped on {:?}, not the curvature cap; singularity not resolved",
            run.termination
        ));
        return report;
    }

    // Roundness of the final state.
    if run.final_profile.boundary == BoundaryMode::SpherePoles {
        let c = run.final_profile.curvature();
        let (mut kmin, mut kmax) = (f64::INFINITY, f64::NEG_INFINITY);
        for &v in &c.rm_norm {
            kmin = kmin.min(v);
            kmax = kmax.max(v);
        }
        let k_ratio = if kmax > 0.0 { kmin / kmax } else { 0.0 };
        report.round_k_ratio = Some(k_ratio);
        report.round_shape_err = Some(round_shape_error(&run.final_profile));
        if k_ratio >= cfg.round_ratio_min
            && report.round_shape_err.expect("just set") <= cfg.round_shape_tol
        {
            report.verdict = Verdict::RoundPoint;
            report.evidence.push(format!(
                "curvature ratio {k_ratio:.4} >= {} and shape error {:.4} <= {}",
                cfg.round_ratio_min,
                report.round_shape_err.expect("just set"),
                cfg.round_shape_tol
            ));
            return report;
        }
    }

    // Type-I neckpinch: collapsed neck, surviving caps, bounded ratio.
    let first = series.first();
    let last = series.last();
    if let (Some(f0), Some(fl)) = (first, last) {
        let collapse = match (f0.r_min, fl.r_min) {
            (Some(r0), Some(r1)) if r0 > 0.0 => {
                report.r_min_initial = Some(r0);
                report.r_min_final = Some(r1);
                r1 < cfg.collapse_ratio * r0
            }
            _ => false,
        };
        let ret_l = match (f0.psi_x_minus, fl.psi_x_minus) {
            (Some(a), Some(b)) if a > 0.0 => {
                let r = b / a;
                report.retention_left = Some(r);
                r >= cfg.cap_retention
            }
            _ => false,
        };
        let ret_r = match (f0.psi_x_plus, fl.psi_x_plus) {
            (Some(a), Some(b)) if a > 0.0 => {
                let r = b / a;
                report.retention_right = Some(r);
                r >= cfg.cap_retention
            }
            _ => false,
        };
        let bounded = match (report.max_ratio, report.ratio_cap) {
            (Some(mr), Some(cap)) => mr <= cap,
            _ => false,
        };
        if collapse && ret_l && ret_r && bounded {
            report.verdict = Verdict::TypeINeckpinch;
            report.evidence.push(format!(
                "neck collapsed ({:.3e} -> {:.3e}), caps retained ({:.2}, {:.2}), max ratio {:.3} within cap {:.3}",
                report.r_min_initial.expect("set above"),
                report.r_min_final.expect("set above"),
                report.retention_left.expect("set above"),
                report.retention_right.expect("set above"),
                report.max_ratio.expect("bounded checked"),
                report.ratio_cap.expect("bounded checked"),
            ));
            return report;
        }
    }

    // Type-II candidate: the ratio broke its cap late in the run.
    if let (Some(mr), Some(cap), Some(frac)) =
        (report.max_ratio, report.ratio_cap, report.ratio_argmax_frac)
    {
        if mr > cap && frac >= 0.5 {
            report.verdict = Verdict::TypeIiCandidate;
            report.evidence.push(format!(
                "max ratio {mr:.3} exceeded cap {cap:.3} at fraction {frac:.2} of the run"
            ));
            return report;
        }
    }

    report.evidence.push("no singularity signature matched".into());
    report
}

/// Relative sup-norm mismatch of a closed profile against the best-fit round
/// profile `A sin(pi (s - s_left) / L)` in arclength.
fn round_shape_error(p: &Profile) -> f64 {
    let s = p.arclength();
    let m = p.len();
    let length = s[m - 1] - s[0];
    if length <= 0.0 {
        return f64::INFINITY;
    }
    // Least-squares amplitude against the sine template.
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..m {
        let model = (std::f64::consts::PI * (s[i] - s[0]) / length).sin();
        num += p.psi[i] * model;
        den += model * model;
    }
    if den <= 0.0 {
        return f64::INFINITY;
    }
    let amp = num / den;
    if amp <= 0.0 {
        return f64::INFINITY;
    }
    let mut worst = 0.0_f64;
    for i in 0..m {
        let model = amp * (std::f64::consts::PI * (s[i] - s[0]) / length).sin();
        worst = worst.max((p.psi[i] - model).abs());
    }
    worst / amp
}

// ---------------------------------------------------------------------------
// Pivot selection and parabolic rescaling
// ---------------------------------------------------------------------------

/// Which pole anchors the pivot search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// The `x = -1` pole.
    Left,
    /// The `x = +1` pole.
    Right,
}

/// A rescaling pivot: a grid point of the final state together with the
/// curvature scale there.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Pivot {
    /// Grid index of the pivot point.
    pub grid_index: usize,
    /// Its coordinate.
    pub x: f64,
    /// Time of the state the pivot was selected on.
    pub t: f64,
    /// Scalar curvature at the pivot: the rescaling factor `Q`.
    pub q: f64,
    /// True when the slope marker (`psi_s = -1/2` crossing nearest the
    /// pole) won over the curvature maximum.
    pub from_slope_marker: bool,
}

/// Select the rescaling pivot on the final state of a run.
///
/// Two candidates compete: the grid point of maximal pointwise curvature,
/// and the crossing of `psi_s = -1/2` (sign flipped on the left side)
/// closest to the chosen pole. Whichever lies closer to that pole wins;
/// ties go to the slope marker. Errors with [`FlowError::PivotNotFound`]
/// when the final state has nonpositive scalar curvature at the winning
/// point (no parabolic scale).
pub fn select_pivot(run: &FlowRun, side: Side) -> Result<Pivot, FlowError> {
    let p = &run.final_profile;
    if p.boundary != BoundaryMode::SpherePoles {
        return Err(FlowError::PivotNotFound {
            reason: "pivot selection needs a closed (sphere) profile".into(),
        });
    }
    let m = p.len();
    let c = p.curvature();
    let s = p.arclength();
    let pole_idx = match side {
        Side::Left => 0usize,
        Side::Right => m - 1,
    };

    // Candidate 1: curvature maximum.
    let (_, k_idx) = c.max_rm();

    // Candidate 2: slope crossing nearest the pole. Approaching the right
    // pole psi_s passes through -1/2; mirrored on the left.
    let target = match side {
        Side::Left => 0.5,
        Side::Right => -0.5,
    };
    let mut slope_idx: Option<usize> = None;
    match side {
        Side::Right => {
            let mut i = m - 1;
            while i > 0 {
                let (a, b) = (c.psi_s[i - 1] - target, c.psi_s[i] - target);
                if a * b <= 0.0 {
                    slope_idx = Some(if a.abs() <= b.abs() { i - 1 } else { i });
                    break;
                }
                i -= 1;
            }
        }
        Side::Left => {
            for i in 0..m - 1 {
                let (a, b) = (c.psi_s[i] - target, c.psi_s[i + 1] - target);
                if a * b <= 0.0 {
                    slope_idx = Some(if a.abs() <= b.abs() { i } else { i + 1 });
                    break;
                }
            }
        }
    }

    let d_pole = |i: usize| (s[i] - s[pole_idx]).abs();
    let (grid_index, from_slope_marker) = match slope_idx {
        Some(si) if d_pole(si) <= d_pole(k_idx) => (si, true),
        Some(_) | None => (k_idx, false),
    };

    let q = c.scalar[grid_index];
    if !(q.is_finite() && q > 0.0) {
        return Err(FlowError::PivotNotFound {
            reason: format!(
                "scalar curvature {q:.3e} at candidate pivot x = {:.6} is not positive",
                p.x[grid_index]
            ),
        });
    }
    Ok(Pivot {
        grid_index,
        x: p.x[grid_index],
        t: p.t,
        q,
        from_slope_marker,
    })
}

/// Parabolically rescale the stored history about a pivot: lengths multiply
/// by `sqrt(Q)`, times become `t_rescaled = Q (t - t_pivot)`. Returns the
/// rescaled snapshots in time order (the final one has `t_rescaled = 0`).
pub fn rescale_blowup(run: &FlowRun, pivot: &Pivot) -> Vec<Profile> {
    let q = pivot.q;
    let lambda = q.sqrt();
    run.snapshots
        .iter()
        .map(|snap| {
            let mut scaled = snap.scaled(lambda);
            scaled.t = q * (snap.t - pivot.t);
            scaled
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::round_sphere;

    fn profile_from_psi(psi: Vec<f64>) -> Profile {
        let m = psi.len();
        let x: Vec<f64> =
            (0..m).map(|i| -1.0 + 2.0 * i as f64 / (m as f64 - 1.0)).collect();
        Profile::new(2, 0.0, BoundaryMode::SpherePoles, x, vec![1.0; m], psi).unwrap()
    }

    #[test]
    fn detects_double_bump_and_neck() {
        let p = profile_from_psi(vec![0.0, 0.5, 0.9, 0.6, 0.4, 0.6, 0.9, 0.5, 0.0]);
        let f = detect_features(&p);
        let bump_idx: Vec<usize> = f.bumps.iter().map(|b| b.index).collect();
        let neck_idx: Vec<usize> = f.necks.iter().map(|n| n.index).collect();
        assert_eq!(bump_idx, vec![2, 6]);
        assert_eq!(neck_idx, vec![4]);
        assert_eq!(f.r_min, Some(0.4));
        assert_eq!(f.r_min_index, Some(4));
        assert_eq!(f.x_minus, Some(p.x[2]));
        assert_eq!(f.x_plus, Some(p.x[6]));
    }

    #[test]
    fn plateau_merges_to_single_feature() {
        let p = profile_from_psi(vec![0.0, 0.4, 0.8, 0.8, 0.8, 0.8, 0.8, 0.4, 0.0]);
        let f = detect_features(&p);
        assert_eq!(f.bumps.len(), 1);
        assert_eq!(f.necks.len(), 0);
        // Plateau spans points 2..=6; midpoint is 4.
        assert_eq!(f.bumps[0].index, 4);
    }

    #[test]
    fn constant_profile_has_no_features() {
        let p = crate::profile::round_cylinder(2, 1.0, 0.0, 33, BoundaryMode::IntervalPeriodic);
        let f = detect_features(&p);
        assert!(f.bumps.is_empty() && f.necks.is_empty());
        assert_eq!(f.r_min, None);
    }

    #[test]
    fn sphere_has_single_bump() {
        let p = round_sphere(2, 1.0, 0.0, 129);
        let f = detect_features(&p);
        assert_eq!(f.bumps.len(), 1);
        assert_eq!(f.bumps[0].index, 64);
        assert!(f.necks.is_empty());
    }

    fn synthetic_series(ts: &[f64], k: impl Fn(f64) -> f64) -> Vec<SeriesRecord> {
        ts.iter()
            .enumerate()
            .map(|(i, &t)| SeriesRecord {
                step: i as u64,
                t,
                dt: 0.0,
                k_max: k(t),
                k_max_x: 0.0,
                r_min: None,
                psi_min: 1.0,
                x_minus: None,
                x_plus: None,
                psi_x_minus: None,
                psi_x_plus: None,
                bump_count: 1,
                neck_count: 0,
                max_abs_slope: 1.0,
                min_scalar: 1.0,
                sup_k1_psi2: 1.0,
                sup_rm_psi2: 1.0,
                pinching: None,
            })
            .collect()
    }

    #[test]
    fn estimate_recovers_exact_type_one_law() {
        // K = 1/(1 - 4t): 1/K is exactly linear, so the fit must recover
        // T = 0.25 to rounding. The sampling is dense enough that the final
        // decade of K holds plenty of records, as in a real run where the
        // step size shrinks with the remaining time.
        let ts: Vec<f64> = (0..2000).map(|i| 0.249 * i as f64 / 1999.0).collect();
        let series = synthetic_series(&ts, |t| 1.0 / (1.0 - 4.0 * t));
        let est = estimate_t(&series, 10).unwrap();
        assert!((est.t_est - 0.25).abs() < 1e-12, "t_est = {}", est.t_est);
        assert!(est.width < 1e-12);
    }

    #[test]
    fn estimate_underestimates_on_faster_blowup() {
        // K = (1 - 4t)^{-2}: 1/K is convex in t, so the chord fit crosses
        // zero before the true blow-up time 0.25. Sample times geometrically
        // in the remaining time so every decade of K is well populated.
        let ts: Vec<f64> = (0..400)
            .map(|i| 0.25 * (1.0 - (4.0e-4_f64).powf(i as f64 / 399.0)))
            .collect();
        let series = synthetic_series(&ts, |t| (1.0 - 4.0 * t).powi(-2));
        let est = estimate_t(&series, 10).unwrap();
        assert!(est.t_est < 0.25, "t_est = {} should undershoot 0.25", est.t_est);
        assert!(est.t_est > *ts.last().unwrap());
        // And the miss is larger than the reported width: the width is a
        // fit-quality number, not an error bar for non-type-I data.
        assert!(0.25 - est.t_est > est.width);
    }

    #[test]
    fn estimate_rejects_flat_history() {
        let ts: Vec<f64> = (0..50).map(|i| i as f64 * 0.01).collect();
        let series = synthetic_series(&ts, |_| 5.0);
        assert!(matches!(
            estimate_t(&series, 10),
            Err(FlowError::NotBlowingUp { .. })
        ));
    }
}
