//! Plot-ready data files: CSV series and JSON reports.
//!
//! All numbers print through Rust's shortest-roundtrip float formatting, so
//! identical data always produces byte-identical files.

use std::fs;
use std::io::Write;
use std::path::Path;

use rotflow::solver::SeriesRecord;
use rotflow::FlowError;
use serde::Serialize;

/// Shortest-roundtrip decimal for a float; empty string for a missing value.
fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn create(path: &Path) -> Result<fs::File, FlowError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| FlowError::io(format!("mkdir {}", dir.display()), e))?;
    }
    fs::File::create(path).map_err(|e| FlowError::io(format!("create {}", path.display()), e))
}

fn finish(mut f: fs::File, path: &Path, body: String) -> Result<(), FlowError> {
    f.write_all(body.as_bytes())
        .map_err(|e| FlowError::io(format!("write {}", path.display()), e))
}

/// `t,k_max,r_min,psi_min,x_plus,x_minus,pinching`, one row per record.
pub fn write_series_csv(path: &Path, series: &[SeriesRecord]) -> Result<(), FlowError> {
    let f = create(path)?;
    let mut body = String::from("t,k_max,r_min,psi_min,x_plus,x_minus,pinching\n");
    for r in series {
        body.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.t,
            r.k_max,
            opt(r.r_min),
            r.psi_min,
            opt(r.x_plus),
            opt(r.x_minus),
            opt(r.pinching),
        ));
    }
    finish(f, path, body)
}

/// `t,ratio`: the type-I blow-up ratio series.
pub fn write_ratio_csv(path: &Path, rows: &[(f64, f64)]) -> Result<(), FlowError> {
    let f = create(path)?;
    let mut body = String::from("t,ratio\n");
    for (t, rho) in rows {
        body.push_str(&format!("{t},{rho}\n"));
    }
    finish(f, path, body)
}

/// One row of the sweep/bisection phase table.
pub struct PhaseRow {
    pub alpha: f64,
    pub verdict: String,
    pub max_ratio: Option<f64>,
    pub t_est: Option<f64>,
}

/// `alpha,verdict,max_ratio,T_est`, sorted by alpha before writing.
pub fn write_phase_csv(path: &Path, rows: &mut Vec<PhaseRow>) -> Result<(), FlowError> {
    rows.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    let f = create(path)?;
    let mut body = String::from("alpha,verdict,max_ratio,T_est\n");
    for r in rows.iter() {
        body.push_str(&format!("{},{},{},{}\n", r.alpha, r.verdict, opt(r.max_ratio), opt(r.t_est)));
    }
    finish(f, path, body)
}

/// Pretty JSON document ending in a newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FlowError> {
    let f = create(path)?;
    let body = serde_json::to_string_pretty(value)
        .map_err(|e| FlowError::InvalidInput(format!("JSON serialization failed: {e}")))?;
    finish(f, path, body + "\n")
}
