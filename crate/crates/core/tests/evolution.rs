//! End-to-end solver behaviour: spatial convergence order on the exact
//! round-sphere law, bitwise determinism, and stability deep into the
//! curvature blow-up.

use rotflow::profile::round_sphere;
use rotflow::solver::run;
use rotflow::{SolverConfig, Termination};

#[test]
fn sphere_radius_law_converges_at_second_order() {
    // r(t)^2 = r0^2 - 2n t exactly; measure the relative defect of
    // psi_max^2 at t = 0.1 across a grid doubling chain.
    let mut errs = Vec::new();
    for m in [65usize, 129, 257] {
        let p = round_sphere(2, 1.0, 0.0, m);
        let cfg = SolverConfig { t_max: Some(0.1), ..Default::default() };
        let out = run(&p, &cfg).unwrap();
        assert_eq!(out.termination, Termination::TMax);
        assert_eq!(out.invariants.total_violations, 0);
        let t = out.final_profile.t;
        let exact = 1.0 - 4.0 * t;
        let r2 = out.final_profile.psi_max().powi(2);
        errs.push(((r2 - exact) / exact).abs());
    }
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(
            order >= 1.9 && order <= 2.6,
            "radius-law convergence order {order:.3} outside [1.9, 2.6]: errs {errs:?}"
        );
    }
    assert!(errs[2] <= 2e-4, "finest-grid radius defect too large: {errs:?}");
}

#[test]
fn identical_runs_are_bitwise_identical() {
    let p = round_sphere(2, 1.0, 0.0, 129);
    let cfg = SolverConfig { t_max: Some(0.06), ..Default::default() };
    let a = run(&p, &cfg).unwrap();
    let b = run(&p, &cfg).unwrap();
    assert_eq!(a.steps_accepted, b.steps_accepted);
    assert_eq!(a.final_profile.t.to_bits(), b.final_profile.t.to_bits());
    for i in 0..p.len() {
        assert_eq!(a.final_profile.phi[i].to_bits(), b.final_profile.phi[i].to_bits());
        assert_eq!(a.final_profile.psi[i].to_bits(), b.final_profile.psi[i].to_bits());
    }
    assert_eq!(a.series.len(), b.series.len());
    for (ra, rb) in a.series.iter().zip(&b.series) {
        assert_eq!(ra.k_max.to_bits(), rb.k_max.to_bits());
        assert_eq!(ra.t.to_bits(), rb.t.to_bits());
    }
}

#[test]
fn deep_sphere_run_reaches_the_cap_cleanly() {
    // Let curvature grow 50x past its initial value; the run must stop by
    // the cap at the predicted time with a clean invariant log.
    let p = round_sphere(2, 1.0, 0.0, 129);
    let cfg = SolverConfig { t_max: None, k_stop: 50.0, ..Default::default() };
    let out = run(&p, &cfg).unwrap();
    assert_eq!(out.termination, Termination::CurvatureCap);
    assert_eq!(out.invariants.total_violations, 0);
    // K = 1/r^2 = 50 happens at t = (1 - 1/50)/4 = 0.245.
    let t = out.final_profile.t;
    assert!((t - 0.245).abs() < 2e-3, "cap hit at t = {t}, expected ~0.245");
    let last = out.series.last().unwrap();
    assert!(last.k_max >= 50.0);
    assert_eq!(last.bump_count, 1);
    assert_eq!(last.neck_count, 0);
    for i in 1..p.len() - 1 {
        assert!(out.final_profile.psi[i] > 0.0);
    }
}
