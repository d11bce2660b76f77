//! Scratch: deep-evolve one family member and print the classification
//! summary plus near-pole health, to tune survivability of sub-critical
//! members.

use rotflow::diagnostics::{classify, ClassifierConfig};
use rotflow::family::{build_initial, FamilySpec};
use rotflow::solver::{run, SolverConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let alpha: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.0);
    let n_grid: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(513);
    let k_stop: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(5e6);
    let cfl: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(0.2);
    let stride: u64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(16);
    let spec = FamilySpec { alpha, n_grid, ..Default::default() };
    let b = build_initial(&spec).expect("build");
    let cfg = SolverConfig {
        k_stop,
        cfl_safety: cfl,
        progress_every: 500_000,
        record_stride: stride,
        ..Default::default()
    };
    let t0 = std::time::Instant::now();
    let fl = run(&b.profile, &cfg).expect("run");
    let wall = t0.elapsed().as_secs_f64();
    let last = fl.series.last().unwrap();
    println!(
        "alpha={alpha} grid={n_grid} k_stop={k_stop:.1e}: term={:?} t={:.6} k_max={:.3e} steps={} rejects={} viol={} wall={wall:.1}s",
        fl.termination, last.t, last.k_max, fl.steps_accepted, fl.steps_rejected,
        fl.invariants.total_violations
    );
    let rep = classify(&fl, &ClassifierConfig::default());
    let f = |v: Option<f64>| v.map(|x| format!("{x:.4e}")).unwrap_or_else(|| "-".into());
    println!(
        "  verdict={} r_min {} -> {} retention=({}, {}) max_ratio={} argmax_frac={} shape_err={} k_ratio={}",
        rep.verdict.token(), f(rep.r_min_initial), f(rep.r_min_final),
        f(rep.retention_left), f(rep.retention_right),
        f(rep.max_ratio), f(rep.ratio_argmax_frac), f(rep.round_shape_err), f(rep.round_k_ratio)
    );
    println!("  ratio_cap={} median_early={} t_est={} width={}",
        f(rep.ratio_cap), f(rep.ratio_median_early), f(rep.t_est), f(rep.t_est_width));
    for n in &rep.evidence {
        println!("  evidence: {n}");
    }
    let p = &fl.final_profile;
    let c = p.curvature();
    let m = p.len();
    println!("  final pole rows (psi / psi_s / k0):");
    for j in [m - 4, m - 3, m - 2] {
        println!(
            "   j={j} psi={:.3e} s={:+.6} k0={:+.3e} k1={:+.3e}",
            p.psi[j], c.psi_s[j], c.k0[j], c.k1[j]
        );
    }
    println!("   series: sup|psi_s|={:.9} min_R={:.3e}", last.max_abs_slope, last.min_scalar);
}
