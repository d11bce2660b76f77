//! The five subcommands: run, sweep, bisect, validate, soliton-check.

use std::fs;
use std::path::{Path, PathBuf};

use rotflow::diagnostics::{classify, ratio_series, SingularityReport};
use rotflow::family::{bisect_critical, build_initial, check_constraints, ConstraintReport, ProbeRecord};
use rotflow::profile::Profile;
use rotflow::soliton::{soliton_residual, PotentialProfile, SolitonReport};
use rotflow::solver::{run, FlowRun};
use rotflow::{FlowError, Termination};
use serde::Serialize;

use crate::config::{build_profile, InitialKind, ResolvedConfig};
use crate::output::{write_json, write_phase_csv, write_ratio_csv, write_series_csv, PhaseRow};

/// Exit status of a subcommand that completed without an error.
pub type Exit = i32;

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct RunArtifacts<'a> {
    series: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    ratio: Option<&'a str>,
    initial: &'a str,
    #[serde(rename = "final")]
    final_profile: &'a str,
    snapshots: &'a str,
}

#[derive(Serialize)]
struct RunReport<'a> {
    config: &'a ResolvedConfig,
    termination: Termination,
    steps_accepted: u64,
    steps_rejected: u64,
    invariants: &'a rotflow::solver::InvariantSummary,
    classification: &'a SingularityReport,
    files: RunArtifacts<'a>,
}

fn write_run_outputs(
    out: &Path,
    cfg: &ResolvedConfig,
    flow: &FlowRun,
    report: &SingularityReport,
) -> Result<(), FlowError> {
    flow.initial.write_csv_file(&out.join("initial.csv"))?;
    flow.final_profile.write_csv_file(&out.join("final.csv"))?;
    write_series_csv(&out.join("series.csv"), &flow.series)?;
    let mut ratio_file = None;
    if let Some(t_est) = report.t_est {
        let rows = ratio_series(&flow.series, t_est);
        if !rows.is_empty() {
            write_ratio_csv(&out.join("ratio.csv"), &rows)?;
            ratio_file = Some("ratio.csv");
        }
    }
    let snap_dir = out.join("snapshots");
    fs::create_dir_all(&snap_dir)
        .map_err(|e| FlowError::io(format!("mkdir {}", snap_dir.display()), e))?;
    for (i, p) in flow.snapshots.iter().enumerate() {
        p.write_csv_file(&snap_dir.join(format!("snapshot_{i:05}.csv")))?;
    }
    write_json(
        &out.join("report.json"),
        &RunReport {
            config: cfg,
            termination: flow.termination,
            steps_accepted: flow.steps_accepted,
            steps_rejected: flow.steps_rejected,
            invariants: &flow.invariants,
            classification: report,
            files: RunArtifacts {
                series: "series.csv",
                ratio: ratio_file,
                initial: "initial.csv",
                final_profile: "final.csv",
                snapshots: "snapshots/",
            },
        },
    )
}

pub fn cmd_run(cfg: &ResolvedConfig, out: &Path) -> Result<Exit, FlowError> {
    let p = build_profile(cfg)?;
    let flow = run(&p, &cfg.solver)?;
    let report = classify(&flow, &cfg.classifier);
    write_run_outputs(out, cfg, &flow, &report)?;
    println!(
        "verdict={} termination={:?} t_final={} k_max={} t_est={} violations={}",
        report.verdict.token(),
        flow.termination,
        flow.final_profile.t,
        flow.series.last().map(|r| r.k_max).unwrap_or(f64::NAN),
        report.t_est.map(|v| v.to_string()).unwrap_or_else(|| "-".into()),
        flow.invariants.total_violations,
    );
    Ok(0)
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct SweepEntry {
    alpha: f64,
    verdict: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_est: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    termination: Option<Termination>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct SweepReport<'a> {
    config: &'a ResolvedConfig,
    entries: &'a [SweepEntry],
}

pub fn cmd_sweep(cfg: &ResolvedConfig, out: &Path) -> Result<Exit, FlowError> {
    let alphas = cfg.sweep_alphas.clone().expect("resolved sweep config");
    let base = match cfg.initial.as_ref() {
        Some(InitialKind::Family(spec)) => spec.clone(),
        _ => unreachable!("resolve() enforces a family initial section for sweep"),
    };

    // Independent probes; no shared mutable state. Results are keyed by
    // alpha and sorted before writing, so scheduling cannot leak into the
    // outputs.
    let worker = |alpha: f64| -> Result<(SingularityReport, Termination), FlowError> {
        let mut spec = base.clone();
        spec.alpha = alpha;
        let p = build_initial(&spec)?.profile;
        let flow = run(&p, &cfg.solver)?;
        Ok((classify(&flow, &cfg.classifier), flow.termination))
    };

    let max_workers = std::thread::available_parallelism().map(|v| v.get()).unwrap_or(4);
    let mut entries: Vec<SweepEntry> = Vec::with_capacity(alphas.len());
    for chunk in alphas.chunks(max_workers) {
        let results: Vec<(f64, Result<(SingularityReport, Termination), FlowError>)> =
            std::thread::scope(|scope| {
                let handles: Vec<_> = chunk
                    .iter()
                    .map(|&alpha| scope.spawn(move || (alpha, worker(alpha))))
                    .collect();
                handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
            });
        for (alpha, res) in results {
            entries.push(match res {
                Ok((rep, term)) => SweepEntry {
                    alpha,
                    verdict: rep.verdict.token().to_string(),
                    max_ratio: rep.max_ratio,
                    t_est: rep.t_est,
                    termination: Some(term),
                    error: None,
                },
                Err(e) => SweepEntry {
                    alpha,
                    verdict: "error".to_string(),
                    max_ratio: None,
                    t_est: None,
                    termination: None,
                    error: Some(e.to_string()),
                },
            });
        }
    }
    entries.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));

    let mut rows: Vec<PhaseRow> = entries
        .iter()
        .map(|e| PhaseRow {
            alpha: e.alpha,
            verdict: e.verdict.clone(),
            max_ratio: e.max_ratio,
            t_est: e.t_est,
        })
        .collect();
    write_phase_csv(&out.join("phase.csv"), &mut rows)?;
    write_json(&out.join("sweep.json"), &SweepReport { config: cfg, entries: &entries })?;
    for e in &entries {
        println!(
            "alpha={} verdict={}{}",
            e.alpha,
            e.verdict,
            e.error.as_deref().map(|m| format!(" ({m})")).unwrap_or_default()
        );
    }
    Ok(0)
}

// ---------------------------------------------------------------------------
// bisect
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct BisectReport<'a> {
    config: &'a ResolvedConfig,
    outcome: &'a rotflow::family::BisectOutcome,
}

pub fn cmd_bisect(cfg: &ResolvedConfig, out: &Path) -> Result<Exit, FlowError> {
    let settings = cfg.bisect.clone().expect("resolved bisect config");
    let base = match cfg.initial.as_ref() {
        Some(InitialKind::Family(spec)) => spec.clone(),
        _ => unreachable!("resolve() enforces a family initial section for bisect"),
    };

    let probe = |alpha: f64, doubled: bool| -> Result<ProbeRecord, FlowError> {
        let mut spec = base.clone();
        spec.alpha = alpha;
        if doubled {
            spec.n_grid = 2 * spec.n_grid - 1;
        }
        let p = build_initial(&spec)?.profile;
        let flow = run(&p, &cfg.solver)?;
        let rep = classify(&flow, &cfg.classifier);
        println!(
            "probe alpha={alpha} n_grid={} verdict={} max_ratio={}",
            spec.n_grid,
            rep.verdict.token(),
            rep.max_ratio.map(|v| v.to_string()).unwrap_or_else(|| "-".into()),
        );
        Ok(ProbeRecord {
            alpha,
            verdict: rep.verdict,
            max_ratio: rep.max_ratio,
            t_est: rep.t_est,
            doubled,
            note: None,
        })
    };

    let outcome = bisect_critical(&settings, probe)?;
    let mut rows: Vec<PhaseRow> = outcome
        .history
        .iter()
        .map(|r| PhaseRow {
            alpha: r.alpha,
            verdict: r.verdict.token().to_string(),
            max_ratio: r.max_ratio,
            t_est: r.t_est,
        })
        .collect();
    write_phase_csv(&out.join("phase.csv"), &mut rows)?;
    write_json(&out.join("bisect.json"), &BisectReport { config: cfg, outcome: &outcome })?;
    println!(
        "bracket=[{}, {}] alpha_critical={} probes={} converged={}",
        outcome.alpha_lo, outcome.alpha_hi, outcome.alpha_critical, outcome.probes_used, outcome.converged
    );
    Ok(if outcome.converged { 0 } else { 1 })
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct ValidateReport<'a> {
    config: &'a ResolvedConfig,
    report: &'a ConstraintReport,
}

pub fn cmd_validate(cfg: &ResolvedConfig, out: &Path) -> Result<Exit, FlowError> {
    let p = build_profile(cfg)?;
    let report = check_constraints(&p);
    for c in &report.checks {
        println!(
            "{} {}: {} (measured {} vs threshold {})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail,
            c.measured,
            c.threshold
        );
    }
    write_json(&out.join("validate.json"), &ValidateReport { config: cfg, report: &report })?;
    Ok(if report.passed { 0 } else { 1 })
}

// ---------------------------------------------------------------------------
// soliton-check
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct SolitonCheckReport<'a> {
    config: &'a ResolvedConfig,
    tolerance: f64,
    passed: bool,
    report: &'a SolitonReport,
}

/// Parse a potential CSV: comment lines `# ...`, header `x,f`, then rows.
/// The `x` column must match the profile grid.
fn read_potential(path: &Path, p: &Profile) -> Result<Vec<f64>, FlowError> {
    let text = fs::read_to_string(path)
        .map_err(|e| FlowError::io(format!("potential file {}", path.display()), e))?;
    let mut f = Vec::with_capacity(p.len());
    let mut saw_header = false;
    let mut row = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            if line != "x,f" {
                return Err(FlowError::InvalidInput(format!(
                    "{}:{}: expected header `x,f`, found `{line}`",
                    path.display(),
                    lineno + 1
                )));
            }
            saw_header = true;
            continue;
        }
        let mut parts = line.split(',');
        let (Some(xs), Some(fs_), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(FlowError::InvalidInput(format!(
                "{}:{}: expected two comma-separated fields",
                path.display(),
                lineno + 1
            )));
        };
        let x: f64 = xs.trim().parse().map_err(|e| {
            FlowError::InvalidInput(format!("{}:{}: bad x value: {e}", path.display(), lineno + 1))
        })?;
        let v: f64 = fs_.trim().parse().map_err(|e| {
            FlowError::InvalidInput(format!("{}:{}: bad f value: {e}", path.display(), lineno + 1))
        })?;
        if row >= p.len() {
            return Err(FlowError::InvalidInput(format!(
                "potential file has more rows than the profile grid ({})",
                p.len()
            )));
        }
        if (x - p.x[row]).abs() > 1e-9 * (1.0 + x.abs()) {
            return Err(FlowError::InvalidInput(format!(
                "{}:{}: x = {x} does not match profile grid x[{row}] = {}",
                path.display(),
                lineno + 1,
                p.x[row]
            )));
        }
        f.push(v);
        row += 1;
    }
    if f.len() != p.len() {
        return Err(FlowError::InvalidInput(format!(
            "potential file has {} rows, profile grid has {}",
            f.len(),
            p.len()
        )));
    }
    Ok(f)
}

pub fn cmd_soliton_check(cfg: &ResolvedConfig, out: &Path) -> Result<Exit, FlowError> {
    let paths = cfg.soliton.clone().expect("resolved soliton config");
    let p = Profile::read_csv_file(Path::new(&paths.profile))?;
    let f = read_potential(Path::new(&paths.potential), &p)?;
    let pot = PotentialProfile::from_samples(&p, f)?;
    let curv = p.curvature();
    let report = soliton_residual(&p, &pot, &curv)?;
    let passed = report.sup_radial <= paths.tolerance && report.sup_spherical <= paths.tolerance;
    write_json(
        &out.join("soliton.json"),
        &SolitonCheckReport { config: cfg, tolerance: paths.tolerance, passed, report: &report },
    )?;
    println!(
        "sup_radial={} sup_spherical={} tolerance={} passed={}",
        report.sup_radial, report.sup_spherical, paths.tolerance, passed
    );
    Ok(if passed { 0 } else { 1 })
}

/// Shared across subcommands: ensure the output directory exists.
pub fn ensure_out_dir(out: &PathBuf) -> Result<(), FlowError> {
    fs::create_dir_all(out).map_err(|e| FlowError::io(format!("mkdir {}", out.display()), e))
}
