//! Scratch: evolve the alpha = 0 member to chosen times and print the
//! curvature rows adjacent to both poles, to locate where the discrete cap
//! kink develops.

use rotflow::family::{build_initial, FamilySpec};
use rotflow::solver::{run, SolverConfig};

fn main() {
    let spec = FamilySpec { alpha: 0.0, n_grid: 513, ..Default::default() };
    let b = build_initial(&spec).expect("build");
    for &tm in &[0.05, 0.075, 0.080, 0.0805, 0.081] {
        let cfg = SolverConfig {
            t_max: Some(tm),
            k_stop: 1e9,
            ..Default::default()
        };
        match run(&b.profile, &cfg) {
            Err(e) => {
                println!("t_max={tm}: ERR {e}");
                continue;
            }
            Ok(fl) => {
                let p = &fl.final_profile;
                let c = p.curvature();
                let m = p.len();
                let last = fl.series.last().unwrap();
                println!(
                    "== t_max={tm} term={:?} t={:.6} k_max={:.1} viol={} rejects={}",
                    fl.termination, p.t, last.k_max, fl.invariants.total_violations, fl.steps_rejected
                );
                print!("  right rows (j: psi | psi_s | k0 | k1):");
                for j in (m - 8)..m {
                    print!(
                        "\n   j={j} psi={:.4e} s={:+.6} k0={:+.4e} k1={:+.4e} phi={:.4e}",
                        p.psi[j], c.psi_s[j], c.k0[j], c.k1[j], p.phi[j]
                    );
                }
                println!();
                print!("  left rows:");
                for j in 0..6 {
                    print!(
                        "\n   j={j} psi={:.4e} s={:+.6} k0={:+.4e} k1={:+.4e} phi={:.4e}",
                        p.psi[j], c.psi_s[j], c.k0[j], c.k1[j], p.phi[j]
                    );
                }
                println!();
            }
        }
    }
}
