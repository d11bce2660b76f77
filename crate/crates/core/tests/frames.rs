//! The closed-form frame curvature formulas against brute-force tensor
//! contractions, over large batches of random orthonormal frames.

mod common;

use common::{curvature_tensor, oracle_ricci, oracle_sectional, random_orthonormal, rng};
use rand::Rng;
use rotflow::frame::{frame_ricci, frame_sectional, FrameSet};

#[test]
fn sectional_and_ricci_match_full_tensor_contraction() {
    let mut rng = rng(0x00f7_a3e5);
    for n in [2usize, 3, 4] {
        let dim = n + 1;
        for _ in 0..1000 {
            let k0 = rng.gen_range(-3.0..3.0);
            let k1 = rng.gen_range(-3.0..3.0);
            let r = curvature_tensor(dim, k0, k1);
            let vecs = random_orthonormal(&mut rng, dim, dim);
            let frame = FrameSet::new(vecs.clone()).unwrap();
            for i in 0..dim {
                let ric = frame_ricci(k0, k1, &frame, i).unwrap();
                let ric_ref = oracle_ricci(&r, &vecs[i]);
                assert!(
                    (ric - ric_ref).abs() <= 1e-12,
                    "n={n} ricci({i}): {ric} vs tensor {ric_ref}"
                );
                for j in i + 1..dim {
                    let sec = frame_sectional(k0, k1, &frame, i, j).unwrap();
                    let sec_ref = oracle_sectional(&r, &vecs[i], &vecs[j]);
                    assert!(
                        (sec - sec_ref).abs() <= 1e-12,
                        "n={n} sectional({i},{j}): {sec} vs tensor {sec_ref}"
                    );
                }
            }
        }
    }
}

#[test]
fn ricci_is_the_sectional_sum_over_a_completed_basis() {
    let mut rng = rng(0x00b2_c4d6);
    for n in [2usize, 3, 4] {
        let dim = n + 1;
        for _ in 0..200 {
            let k0 = rng.gen_range(-2.0..2.0);
            let k1 = rng.gen_range(-2.0..2.0);
            let frame = FrameSet::new(random_orthonormal(&mut rng, dim, dim)).unwrap();
            for i in 0..dim {
                let ric = frame_ricci(k0, k1, &frame, i).unwrap();
                let mut sum = 0.0;
                for j in 0..dim {
                    if j != i {
                        sum += frame_sectional(k0, k1, &frame, i, j).unwrap();
                    }
                }
                assert!((ric - sum).abs() <= 1e-12, "n={n} i={i}: ric {ric} vs sum {sum}");
            }
        }
    }
}

#[test]
fn pinched_positive_curvature_keeps_the_ricci_gate_open() {
    // With k0, k1 > 0, k0/k1 < 1/(n-1), and scalar curvature R < n/2, every
    // Ricci eigenvalue sits strictly below R/n < 1/2, so for any two
    // orthonormal directions u, v the quantity 1 - Ric(u,u) - Ric(v,v)
    // stays positive. Sample the hypotheses, then check the conclusion
    // through the public frame evaluators.
    let mut rng = rng(0x0076_1029);
    for n in [2usize, 3, 4] {
        let dim = n + 1;
        let nf = n as f64;
        for _ in 0..300 {
            let k1_raw = rng.gen_range(0.01..1.0);
            let k0_raw = k1_raw * rng.gen_range(1e-6..1.0) / (nf - 1.0).max(1.0);
            let scalar_raw = 2.0 * nf * k0_raw + nf * (nf - 1.0) * k1_raw;
            let target = 0.5 * nf * rng.gen_range(0.05..0.98);
            let scale = target / scalar_raw;
            let (k0, k1) = (k0_raw * scale, k1_raw * scale);
            let scalar = 2.0 * nf * k0 + nf * (nf - 1.0) * k1;
            assert!(scalar < 0.5 * nf);

            let vecs = random_orthonormal(&mut rng, dim, 2);
            let frame = FrameSet::new(vecs).unwrap();
            let ric_u = frame_ricci(k0, k1, &frame, 0).unwrap();
            let ric_v = frame_ricci(k0, k1, &frame, 1).unwrap();
            for ric in [ric_u, ric_v] {
                assert!(ric > 0.0, "n={n}: ricci {ric} should be positive");
                assert!(
                    ric < scalar / nf + 1e-12,
                    "n={n}: ricci {ric} exceeds scalar/n = {}",
                    scalar / nf
                );
                assert!(ric < 0.5);
            }
            assert!(
                1.0 - ric_u - ric_v > 0.0,
                "n={n}: gate closed, ric_u={ric_u} ric_v={ric_v}"
            );
        }
    }
}
