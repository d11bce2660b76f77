//! Configuration loading and resolution.
//!
//! A single JSON document drives every subcommand. The raw document is
//! all-optional; resolution fills defaults, enforces cross-field rules, and
//! produces the fully resolved configuration that gets embedded verbatim in
//! every JSON output as the audit trail.

use std::fs;
use std::path::Path;

use rotflow::diagnostics::ClassifierConfig;
use rotflow::family::{BisectSettings, FamilySpec};
use rotflow::profile::{round_cylinder, round_sphere, BoundaryMode, Profile};
use rotflow::{FlowError, SolverConfig};
use serde::{Deserialize, Serialize};

/// Solver section: the core solver parameters plus the grid size used when
/// initial data is synthesized (family, sphere, cylinder).
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
pub struct RawSolver {
    pub n_grid: Option<usize>,
    #[serde(flatten)]
    pub params: SolverConfig,
}

/// Exactly one of these selects the initial data.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RawInitial {
    /// Family member (partial fields allowed; the rest default).
    pub family: Option<FamilySpec>,
    /// Path to a profile CSV.
    pub profile: Option<String>,
    /// Round sphere of this radius.
    pub sphere: Option<RawSphere>,
    /// Homogeneous cylinder of this radius.
    pub cylinder: Option<RawCylinder>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSphere {
    pub radius: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawCylinder {
    pub radius: f64,
    /// "interval_periodic" (default) or "interval_neumann".
    pub boundary: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RawSweep {
    pub alphas: Vec<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RawSoliton {
    pub profile: Option<String>,
    pub potential: Option<String>,
    pub tolerance: Option<f64>,
}

/// The raw JSON document. Unknown keys are hard errors so a typo cannot
/// silently fall back to defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RawConfig {
    /// Fibre dimension; defaults to 2 (or the profile file's value).
    pub n: Option<usize>,
    pub solver: RawSolver,
    pub classifier: ClassifierConfig,
    pub initial: RawInitial,
    pub sweep: RawSweep,
    pub bisect: BisectSettings,
    pub soliton: RawSoliton,
}

/// Fully resolved description of the initial data (audit trail).
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    Family(FamilySpec),
    ProfileFile { path: String },
    Sphere { radius: f64, n_grid: usize },
    Cylinder { radius: f64, boundary: String, n_grid: usize },
}

/// Soliton-check inputs after resolution.
#[derive(Debug, Clone, Serialize)]
pub struct SolitonPaths {
    pub profile: String,
    pub potential: String,
    pub tolerance: f64,
}

/// Everything a subcommand needs, with every default filled in. Serialized
/// verbatim into each JSON output.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedConfig {
    pub n: usize,
    pub solver: SolverConfig,
    pub classifier: ClassifierConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_alphas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bisect: Option<BisectSettings>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub soliton: Option<SolitonPaths>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Which sections a subcommand requires.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Need {
    /// `run` / `validate`: initial data.
    Initial,
    /// `sweep`: a family plus the alpha list.
    Sweep,
    /// `bisect`: a family plus bracket settings.
    Bisect,
    /// `soliton-check`: profile + potential paths only.
    Soliton,
}

/// Read and parse the raw JSON document.
pub fn load_raw(path: &Path) -> Result<RawConfig, FlowError> {
    let text = fs::read_to_string(path)
        .map_err(|e| FlowError::io(format!("config file {}", path.display()), e))?;
    serde_json::from_str(&text)
        .map_err(|e| FlowError::config("<document>", format!("malformed JSON config: {e}")))
}

fn count_some(init: &RawInitial) -> usize {
    init.family.is_some() as usize
        + init.profile.is_some() as usize
        + init.sphere.is_some() as usize
        + init.cylinder.is_some() as usize
}

/// Resolve the raw document for a subcommand, enforcing the cross-field
/// invariants and filling every default.
pub fn resolve(raw: &RawConfig, need: Need, seed: Option<u64>) -> Result<ResolvedConfig, FlowError> {
    let mut out = ResolvedConfig {
        n: raw.n.unwrap_or(2),
        solver: raw.solver.params.clone(),
        classifier: raw.classifier.clone(),
        initial: None,
        sweep_alphas: None,
        bisect: None,
        soliton: None,
        seed,
    };
    if out.n < 2 {
        return Err(FlowError::config("n", format!("fibre dimension {} < 2", out.n)));
    }

    if need == Need::Soliton {
        let profile = raw
            .soliton
            .profile
            .clone()
            .ok_or_else(|| FlowError::config("soliton.profile", "missing profile CSV path"))?;
        let potential = raw
            .soliton
            .potential
            .clone()
            .ok_or_else(|| FlowError::config("soliton.potential", "missing potential CSV path"))?;
        let tolerance = raw.soliton.tolerance.unwrap_or(1e-8);
        if !(tolerance > 0.0) {
            return Err(FlowError::config("soliton.tolerance", "must be positive"));
        }
        out.soliton = Some(SolitonPaths { profile, potential, tolerance });
        return Ok(out);
    }

    let n_some = count_some(&raw.initial);
    if n_some != 1 {
        return Err(FlowError::config(
            "initial",
            format!(
                "exactly one of family | profile | sphere | cylinder must be given (found {n_some})"
            ),
        ));
    }

    let grid = || -> Result<usize, FlowError> {
        let g = raw.solver.n_grid.ok_or_else(|| {
            FlowError::config("solver.n_grid", "missing (required to synthesize initial data)")
        })?;
        if g < 5 {
            return Err(FlowError::config("solver.n_grid", format!("{g} is too small (need >= 5)")));
        }
        Ok(g)
    };

    let initial = if let Some(fam) = &raw.initial.family {
        let mut spec = fam.clone();
        spec.n = out.n;
        spec.n_grid = grid()?;
        spec.validate().map_err(prefix_family)?;
        InitialKind::Family(spec)
    } else if let Some(path) = &raw.initial.profile {
        InitialKind::ProfileFile { path: path.clone() }
    } else if let Some(sp) = &raw.initial.sphere {
        if !(sp.radius > 0.0) {
            return Err(FlowError::config("initial.sphere.radius", "must be positive"));
        }
        InitialKind::Sphere { radius: sp.radius, n_grid: grid()? }
    } else {
        let cy = raw.initial.cylinder.as_ref().unwrap();
        if !(cy.radius > 0.0) {
            return Err(FlowError::config("initial.cylinder.radius", "must be positive"));
        }
        let tok = cy.boundary.as_deref().unwrap_or("interval_periodic");
        let mode = BoundaryMode::from_token(tok)
            .map_err(|_| FlowError::config("initial.cylinder.boundary", format!("unknown boundary `{tok}`")))?;
        if mode == BoundaryMode::SpherePoles {
            return Err(FlowError::config(
                "initial.cylinder.boundary",
                "a cylinder needs an interval mode, not sphere_poles",
            ));
        }
        InitialKind::Cylinder { radius: cy.radius, boundary: tok.to_string(), n_grid: grid()? }
    };

    match need {
        Need::Sweep => {
            if !matches!(initial, InitialKind::Family(_)) {
                return Err(FlowError::config("initial.family", "sweep needs a family initial section"));
            }
            let mut alphas = raw.sweep.alphas.clone();
            if alphas.len() < 2 {
                return Err(FlowError::config(
                    "sweep.alphas",
                    format!("need at least 2 alphas, got {}", alphas.len()),
                ));
            }
            for &a in &alphas {
                if !(0.0..=1.0).contains(&a) {
                    return Err(FlowError::config("sweep.alphas", format!("alpha {a} outside [0, 1]")));
                }
            }
            alphas.sort_by(|a, b| a.total_cmp(b));
            let before = alphas.len();
            alphas.dedup();
            if alphas.len() < before {
                eprintln!("warning: {} duplicate alpha value(s) removed", before - alphas.len());
            }
            if alphas.len() < 2 {
                return Err(FlowError::config("sweep.alphas", "fewer than 2 distinct alphas"));
            }
            out.sweep_alphas = Some(alphas);
        }
        Need::Bisect => {
            if !matches!(initial, InitialKind::Family(_)) {
                return Err(FlowError::config("initial.family", "bisect needs a family initial section"));
            }
            let b = raw.bisect.clone();
            if !(b.alpha_lo < b.alpha_hi) {
                return Err(FlowError::config("bisect.alpha_lo", "bracket must satisfy alpha_lo < alpha_hi"));
            }
            if !(b.tol > 0.0) {
                return Err(FlowError::config("bisect.tol", "must be positive"));
            }
            if b.max_probes == 0 {
                return Err(FlowError::config("bisect.max_probes", "must be at least 1"));
            }
            out.bisect = Some(b);
        }
        Need::Initial | Need::Soliton => {}
    }

    out.initial = Some(initial);
    Ok(out)
}

fn prefix_family(e: FlowError) -> FlowError {
    match e {
        FlowError::ConfigError { path, message } => {
            FlowError::config(format!("initial.family.{path}"), message)
        }
        other => other,
    }
}

/// Materialize the initial profile described by the resolved config.
pub fn build_profile(cfg: &ResolvedConfig) -> Result<Profile, FlowError> {
    match cfg.initial.as_ref().expect("resolved config carries initial data") {
        InitialKind::Family(spec) => Ok(rotflow::family::build_initial(spec)?.profile),
        // The profile file is authoritative for its own fibre dimension.
        InitialKind::ProfileFile { path } => Profile::read_csv_file(Path::new(path)),
        InitialKind::Sphere { radius, n_grid } => Ok(round_sphere(cfg.n, *radius, 0.0, *n_grid)),
        InitialKind::Cylinder { radius, boundary, n_grid } => {
            let mode = BoundaryMode::from_token(boundary)?;
            Ok(round_cylinder(cfg.n, *radius, 0.0, *n_grid, mode))
        }
    }
}
