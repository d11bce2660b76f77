//! Shared helpers for the integration suites: seeded randomness, random
//! orthonormal frames, and a brute-force curvature tensor with full-index
//! contraction oracles for the closed-form frame formulas.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic RNG for a test, one seed per call site.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `count` orthonormal vectors in `dim` dimensions: uniform raw draws run
/// through Gram-Schmidt twice (the second pass scrubs the O(eps) residue a
/// single pass leaves on nearly dependent draws). Degenerate draws are
/// redrawn.
pub fn random_orthonormal(rng: &mut ChaCha8Rng, dim: usize, count: usize) -> Vec<Vec<f64>> {
    assert!(count <= dim, "cannot fit {count} orthonormal vectors in dim {dim}");
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(count);
    while out.len() < count {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for _ in 0..2 {
            for u in &out {
                let d: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
                for (vi, ui) in v.iter_mut().zip(u) {
                    *vi -= d * ui;
                }
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm < 1e-6 {
            continue;
        }
        v.iter_mut().for_each(|a| *a /= norm);
        out.push(v);
    }
    out
}

/// Full curvature tensor of the rotationally symmetric model in an adapted
/// orthonormal basis (index 0 radial):
/// `R[a][b][c][d] = lam(a,b) * (d_ac d_bd - d_ad d_bc)` with `lam = k0` when
/// the pair touches the radial direction and `k1` otherwise. Diagonal `lam`
/// entries multiply a vanishing bracket, so their value never contributes.
pub fn curvature_tensor(dim: usize, k0: f64, k1: f64) -> Vec<Vec<Vec<Vec<f64>>>> {
    let lam = |a: usize, b: usize| if a == 0 || b == 0 { k0 } else { k1 };
    let del = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
    (0..dim)
        .map(|a| {
            (0..dim)
                .map(|b| {
                    (0..dim)
                        .map(|c| {
                            (0..dim)
                                .map(|e| lam(a, b) * (del(a, c) * del(b, e) - del(a, e) * del(b, c)))
                                .collect()
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// Sectional curvature of `span(u, v)` by brute-force contraction
/// `sum R[a][b][c][e] u_a v_b u_c v_e` (u, v orthonormal).
pub fn oracle_sectional(r: &[Vec<Vec<Vec<f64>>>], u: &[f64], v: &[f64]) -> f64 {
    let dim = r.len();
    let mut s = 0.0;
    for a in 0..dim {
        for b in 0..dim {
            for c in 0..dim {
                for e in 0..dim {
                    s += r[a][b][c][e] * u[a] * v[b] * u[c] * v[e];
                }
            }
        }
    }
    s
}

/// Ricci quadratic form `Ric(u, u)` by brute-force trace
/// `sum_a R[a][b][a][e] u_b u_e` (u a unit vector).
pub fn oracle_ricci(r: &[Vec<Vec<Vec<f64>>>], u: &[f64]) -> f64 {
    let dim = r.len();
    let mut s = 0.0;
    for a in 0..dim {
        for b in 0..dim {
            for e in 0..dim {
                s += r[a][b][a][e] * u[b] * u[e];
            }
        }
    }
    s
}
