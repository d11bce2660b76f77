//! Pointwise curvature-field identities on generic closed profiles:
//! algebraic traces, smooth-pole coincidence of the two sectional
//! curvatures, and covariance under parabolic rescaling.

use rotflow::profile::{round_sphere, BoundaryMode, Profile};

/// A genuinely non-round closed profile with exact unit pole slopes:
/// psi(u) = sin(u) + beta*sin(3u) on u = (x+1)pi/2 with the constant lapse
/// phi = (pi/2)(1+3*beta), so psi_s = (cos u + 3 beta cos 3u)/(1+3*beta)
/// equals +1 and -1 at the two poles. Positive in the interior for
/// 0 <= beta < 0.3 since psi = sin(u) (1.3 - 0.4 sin^2 u) at beta = 0.1.
fn bumpy_sphere(n: usize, beta: f64, m: usize) -> Profile {
    let x: Vec<f64> = (0..m).map(|i| -1.0 + 2.0 * i as f64 / (m - 1) as f64).collect();
    let phi = vec![std::f64::consts::FRAC_PI_2 * (1.0 + 3.0 * beta); m];
    let psi: Vec<f64> = x
        .iter()
        .map(|&xi| {
            let u = (xi + 1.0) * std::f64::consts::FRAC_PI_2;
            u.sin() + beta * (3.0 * u).sin()
        })
        .collect();
    Profile::new(n, 0.0, BoundaryMode::SpherePoles, x, phi, psi).unwrap()
}

#[test]
fn trace_identities_are_algebraically_exact() {
    for (n, p) in [
        (2usize, bumpy_sphere(2, 0.1, 101)),
        (3, bumpy_sphere(3, 0.07, 97)),
        (5, round_sphere(5, 1.3, 0.0, 81)),
    ] {
        let c = p.curvature();
        let nf = n as f64;
        for i in 0..p.len() {
            let scale = c.k0[i].abs().max(c.k1[i].abs()).max(1.0);
            let scalar = 2.0 * nf * c.k0[i] + nf * (nf - 1.0) * c.k1[i];
            assert!(
                (c.scalar[i] - scalar).abs() <= 1e-13 * scale,
                "scalar trace off at i={i}: {} vs {scalar}",
                c.scalar[i]
            );
            let ric_r = nf * c.k0[i];
            let ric_s = c.k0[i] + (nf - 1.0) * c.k1[i];
            assert!((c.ric_radial[i] - ric_r).abs() <= 1e-13 * scale);
            assert!((c.ric_spherical[i] - ric_s).abs() <= 1e-13 * scale);
            let rm = c.k0[i].abs().max(c.k1[i].abs());
            assert_eq!(c.rm_norm[i], rm, "rm_norm mismatch at i={i}");
        }
    }
}

#[test]
fn sectional_curvatures_coincide_at_smooth_poles() {
    // At a smooth pole the radial and spherical sectional curvatures agree;
    // discretely their gap near the pole must vanish at second order.
    let mut errs = Vec::new();
    for m in [65usize, 129, 257] {
        let p = bumpy_sphere(2, 0.1, m);
        let c = p.curvature();
        let mut worst: f64 = 0.0;
        for j in [0usize, 1, 2, m - 3, m - 2, m - 1] {
            let scale = c.k0[j].abs().max(1.0);
            worst = worst.max((c.k0[j] - c.k1[j]).abs() / scale);
        }
        errs.push(worst);
    }
    assert!(errs[2] <= 2e-3, "pole gap too large on the finest grid: {:?}", errs);
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(
            order >= 1.7,
            "pole curvature gap converges at order {order:.2} < 1.7: {errs:?}"
        );
    }
}

#[test]
fn curvature_is_covariant_under_parabolic_rescaling() {
    let p = bumpy_sphere(2, 0.1, 129);
    let c = p.curvature();

    // Powers of two commute with rounding, so lambda = 4 is bitwise.
    let p4 = p.scaled(4.0);
    let c4 = p4.curvature();
    assert_eq!(p4.t, p.t * 16.0);
    for i in 0..p.len() {
        assert_eq!(c4.k0[i], c.k0[i] / 16.0, "k0 not bitwise at i={i}");
        assert_eq!(c4.k1[i], c.k1[i] / 16.0, "k1 not bitwise at i={i}");
        assert_eq!(c4.psi_s[i], c.psi_s[i], "psi_s should be scale-free at i={i}");
    }
    let (rm, arg) = c.max_rm();
    let (rm4, arg4) = c4.max_rm();
    assert_eq!(arg4, arg);
    assert_eq!(rm4, rm / 16.0);

    // A generic factor holds to rounding accuracy.
    let lam = 1.7;
    let pl = p.scaled(lam);
    let cl = pl.curvature();
    for i in 0..p.len() {
        let scale = c.k0[i].abs().max(c.k1[i].abs()).max(1e-2);
        assert!((cl.k0[i] * lam * lam - c.k0[i]).abs() <= 1e-12 * scale);
        assert!((cl.k1[i] * lam * lam - c.k1[i]).abs() <= 1e-12 * scale);
    }
    let (rml, _) = cl.max_rm();
    assert!((rml * lam * lam - rm).abs() <= 1e-12 * rm);
}
