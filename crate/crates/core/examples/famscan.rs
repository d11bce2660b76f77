//! Scratch scan of family geometry vs (neck_w_wide, q_factor): shape balance
//! at alpha = 0 and constraint status across the alpha grid.

use rotflow::diagnostics::detect_features;
use rotflow::family::{build_initial, check_constraints, FamilySpec};

fn main() {
    for &w_wide in &[0.22, 0.35, 0.5, 0.65, 0.8] {
        for &q in &[24.0, 12.0, 8.0, 6.0, 4.0] {
            let spec = FamilySpec {
                alpha: 0.0,
                neck_w_wide: w_wide,
                q_factor: q,
                n_grid: 513,
                ..Default::default()
            };
            print!("w_wide={w_wide:<5} q={q:<4} ");
            match build_initial(&spec) {
                Err(e) => {
                    println!("BUILD-ERR: {e}");
                    continue;
                }
                Ok(b) => {
                    let p = &b.profile;
                    let f = detect_features(p);
                    let c = p.curvature();
                    let m = p.len();
                    // Left crest and right shoulder heights.
                    let crest = f.bumps.first().map(|b| b.psi).unwrap_or(f64::NAN);
                    let crest_idx = f.bumps.first().map(|b| b.index).unwrap_or(0);
                    let mut valley_min = f64::INFINITY;
                    let mut shoulder = 0.0_f64;
                    for i in crest_idx..m - 1 {
                        valley_min = valley_min.min(p.psi[i]);
                    }
                    // Shoulder: max psi in the right 40% of arclength.
                    for i in (6 * m / 10)..m - 1 {
                        shoulder = shoulder.max(p.psi[i]);
                    }
                    let mut min_ric = f64::INFINITY;
                    let mut min_scalar = f64::INFINITY;
                    for i in 1..m - 1 {
                        min_ric = min_ric.min(c.ric_radial[i]).min(c.ric_spherical[i]);
                        min_scalar = min_scalar.min(c.scalar[i]);
                    }
                    let rep = check_constraints(p);
                    print!(
                        "bumps={} necks={} crest={crest:.3} shoulder={shoulder:.3} vmin={valley_min:.3} minRic={min_ric:+.3} minR={min_scalar:+.3} a0-cons={} ",
                        f.bumps.len(),
                        f.necks.len(),
                        if rep.passed { "PASS" } else { "FAIL" }
                    );
                    if !rep.passed {
                        for ck in &rep.checks {
                            if !ck.passed {
                                print!("[{}] ", ck.name);
                            }
                        }
                    }
                }
            }
            // Constraint status across the alpha grid.
            let mut bad: Vec<String> = Vec::new();
            for i in 0..=10 {
                let alpha = i as f64 / 10.0;
                let spec = FamilySpec {
                    alpha,
                    neck_w_wide: w_wide,
                    q_factor: q,
                    n_grid: 513,
                    ..Default::default()
                };
                match build_initial(&spec) {
                    Err(e) => bad.push(format!("a={alpha}: ERR {e}")),
                    Ok(b) => {
                        let rep = check_constraints(&b.profile);
                        if !rep.passed {
                            let names: Vec<&str> = rep
                                .checks
                                .iter()
                                .filter(|c| !c.passed)
                                .map(|c| c.name.as_str())
                                .collect();
                            bad.push(format!("a={alpha}: {}", names.join("+")));
                        }
                    }
                }
            }
            if bad.is_empty() {
                println!("grid=ALL-PASS");
            } else {
                println!("grid-fails: {}", bad.join("; "));
            }
        }
    }
}
