//! Error taxonomy shared by the whole laboratory.

use thiserror::Error;

/// Every failure mode an operation in this crate can report.
#[derive(Debug, Error)]
pub enum FlowError {
    /// An interior `psi` value reached the positivity floor in an accepted
    /// state; the warped product degenerated away from a pole.
    #[error("interior psi degenerated at x = {x:.6} (psi = {psi:.3e}, floor = {floor:.3e}, t = {t:.6e})")]
    DegenerateInterior { x: f64, psi: f64, floor: f64, t: f64 },

    /// The adaptive step shrank below the resolvable floor; the remaining
    /// evolution cannot be represented at this resolution.
    #[error("time step underflow at t = {t:.6e} (dt = {dt:.3e} after {rejects} rejections)")]
    DtFloor { t: f64, dt: f64, rejects: u32 },

    /// A blow-up time was requested from a series whose curvature maximum is
    /// not growing like a singularity.
    #[error("curvature history is not blowing up: {reason}")]
    NotBlowingUp { reason: String },

    /// No admissible rescaling pivot exists in the stored history.
    #[error("no rescaling pivot found: {reason}")]
    PivotNotFound { reason: String },

    /// Too little stored history to integrate over the requested backward
    /// time window.
    #[error("insufficient stored history: {have} usable slices in [{t_lo:.6e}, {t_hi:.6e}], need {need}")]
    InsufficientHistory { have: usize, need: usize, t_lo: f64, t_hi: f64 },

    /// A supplied frame is not orthonormal to the required tolerance.
    #[error("frame is not orthonormal: {detail}")]
    NotOrthonormal { detail: String },

    /// A level-set operation was asked for at a critical level of the
    /// potential (`f_s = 0` there), where the level set is not a graph.
    #[error("level set at s = {s:.6} is critical: |f_s| = {f_s_abs:.3e}")]
    CriticalLevel { s: f64, f_s_abs: f64 },

    /// Initial data violated one of the structural constraints it must
    /// satisfy (bump count, slope bound, cap concavity, scalar positivity).
    #[error("initial-data constraint violated: {condition} ({detail})")]
    ConstraintViolation { condition: String, detail: String },

    /// Bisection endpoints do not exhibit the two behaviours the dichotomy
    /// needs (pinching at the top, non-pinching at the bottom).
    #[error("bisection endpoints inconsistent: {detail}")]
    InconsistentEndpoints { detail: String },

    /// A probe outcome made the bisection bracket meaningless.
    #[error("bisection lost its dichotomy: {detail}")]
    NonDichotomous { detail: String },

    /// A configuration field is missing, out of range, or inconsistent.
    /// `path` is the dotted field path, e.g. `solver.n_grid`.
    #[error("config error at `{path}`: {message}")]
    ConfigError { path: String, message: String },

    /// Underlying I/O failure (file open, read, write).
    #[error("i/o error on {context}: {source}")]
    IoError {
        context: String,
        #[source]
        source: std::io::Error,
    },

    /// Malformed data handed to a constructor or parser (bad CSV, mismatched
    /// array lengths, non-uniform grid, invalid argument values).
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl FlowError {
    /// Convenience constructor for [`FlowError::IoError`].
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        FlowError::IoError { context: context.into(), source }
    }

    /// Convenience constructor for [`FlowError::ConfigError`].
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        FlowError::ConfigError { path: path.into(), message: message.into() }
    }
}
