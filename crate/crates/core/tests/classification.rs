//! Verdict pipeline on a flow with a known answer: the round sphere must be
//! recognized as shrinking to a round point, with the fitted blow-up time
//! and type-I ratio matching the exact law, robustly across the ratio-cap
//! setting. Feature detection must commute with mirroring the profile.

use rotflow::diagnostics::{classify, detect_features, ClassifierConfig, Verdict};
use rotflow::family::{build_initial, FamilySpec};
use rotflow::profile::{round_sphere, Profile};
use rotflow::solver::run;
use rotflow::{SolverConfig, Termination};

#[test]
fn shrinking_sphere_is_a_round_point_with_the_exact_rate() {
    // K = 1/r^2 with r^2 = 1 - 4t (n = 2), so rho = (T - t) K = 1/(2n) =
    // 0.25 exactly, and T = 0.25.
    let p = round_sphere(2, 1.0, 0.0, 129);
    let cfg = SolverConfig { t_max: None, k_stop: 1e4, ..Default::default() };
    let out = run(&p, &cfg).unwrap();
    assert_eq!(out.termination, Termination::CurvatureCap);
    assert_eq!(out.invariants.total_violations, 0);

    for cap_factor in [5.0, 10.0, 20.0] {
        let ccfg = ClassifierConfig { ratio_cap_factor: cap_factor, ..Default::default() };
        let rep = classify(&out, &ccfg);
        assert_eq!(
            rep.verdict,
            Verdict::RoundPoint,
            "cap factor {cap_factor}: verdict {:?}",
            rep.verdict
        );
        let t_est = rep.t_est.unwrap();
        assert!(
            (t_est - 0.25).abs() <= 0.01 * 0.25,
            "cap factor {cap_factor}: fitted blow-up time {t_est}, want 0.25 within 1%"
        );
        let ratio = rep.ratio_last.unwrap();
        assert!(
            (ratio - 0.25).abs() <= 0.05 * 0.25,
            "cap factor {cap_factor}: final type-I ratio {ratio}, want 0.25 within 5%"
        );
        let peak = rep.max_ratio.unwrap();
        assert!(peak <= rep.ratio_cap.unwrap(), "ratio should never hit the cap on a sphere");
    }
}

#[test]
fn feature_detection_commutes_with_mirroring() {
    // Mirror an asymmetric dumbbell (reverse psi and phi on the same grid);
    // bumps and necks must land at reflected indices with identical values.
    let b = build_initial(&FamilySpec { alpha: 0.4, ..Default::default() }).unwrap();
    let p = b.profile;
    let m = p.len();
    let mirrored = Profile::new(
        p.n,
        p.t,
        p.boundary,
        p.x.clone(),
        p.phi.iter().rev().cloned().collect(),
        p.psi.iter().rev().cloned().collect(),
    )
    .unwrap();

    let f = detect_features(&p);
    let g = detect_features(&mirrored);
    assert_eq!(f.bumps.len(), g.bumps.len());
    assert_eq!(f.necks.len(), g.necks.len());
    for (a, b) in f.bumps.iter().zip(g.bumps.iter().rev()) {
        assert_eq!(a.index, m - 1 - b.index, "bump index not mirrored");
        assert_eq!(a.psi.to_bits(), b.psi.to_bits(), "bump value changed under mirroring");
    }
    for (a, b) in f.necks.iter().zip(g.necks.iter().rev()) {
        assert_eq!(a.index, m - 1 - b.index, "neck index not mirrored");
        assert_eq!(a.psi.to_bits(), b.psi.to_bits(), "neck value changed under mirroring");
    }
    assert_eq!(f.r_min.unwrap().to_bits(), g.r_min.unwrap().to_bits());
}
