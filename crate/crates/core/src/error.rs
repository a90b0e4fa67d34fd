use thiserror::Error;

use crate::expr::ParseError;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure class, used by the CLI to choose an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    NotAdmissible,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("evaluation error in entry ({row}, {col}): {reason}")]
    EntryEval { row: usize, col: usize, reason: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("family failed validation: {0}")]
    Validation(String),

    #[error("not admissible: {0}")]
    NotAdmissible(String),

    #[error("integrator did not converge: error estimate {estimate:e} after {steps} steps")]
    NonConvergence { estimate: f64, steps: usize },

    #[error("degenerate curve: |field| = {min_abs:e} fell below threshold {threshold:e}")]
    DegenerateCurve { min_abs: f64, threshold: f64 },

    #[error("refinement exhausted: {0}")]
    RefinementExhausted(String),

    #[error("everywhere degenerate: {below} of {total} samples below threshold")]
    EverywhereDegenerate { below: usize, total: usize },

    #[error("degenerate crossing at {location}: crossing form eigenvalue {eigenvalue:e} within {tol:e} of zero; refine the grid or perturb the family")]
    DegenerateCrossing { location: f64, eigenvalue: f64, tol: f64 },

    #[error("newton stagnated: residual {residual:e} after {iterations} iterations")]
    NewtonStagnation { residual: f64, iterations: usize },

    #[error("inconsistent result: {0}")]
    Inconsistent(String),

    #[error("zero of the polynomial pair is not isolated: min |P + iQ| on the unit circle is {min_abs:e}")]
    NonIsolatedZero { min_abs: f64 },

    #[error("formula not applicable: {0}")]
    FormulaNotApplicable(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Parse(_)
            | Error::Eval(_)
            | Error::EntryEval { .. }
            | Error::Invalid(_)
            | Error::Validation(_)
            | Error::NonIsolatedZero { .. }
            | Error::FormulaNotApplicable(_) => ErrorKind::Config,
            Error::NotAdmissible(_) => ErrorKind::NotAdmissible,
            _ => ErrorKind::Numerical,
        }
    }

    /// Short machine-readable reason tag.
    pub fn reason(&self) -> &'static str {
        match self {
            Error::Parse(_) => "parse error",
            Error::Eval(_) | Error::EntryEval { .. } => "evaluation error",
            Error::Invalid(_) => "invalid input",
            Error::Validation(_) => "validation failed",
            Error::NotAdmissible(_) => "endpoint degenerate",
            Error::NonConvergence { .. } => "integrator nonconvergence",
            Error::DegenerateCurve { .. } => "degenerate curve",
            Error::RefinementExhausted(_) => "refinement exhausted",
            Error::EverywhereDegenerate { .. } => "everywhere degenerate",
            Error::DegenerateCrossing { .. } => "degenerate crossing",
            Error::NewtonStagnation { .. } => "newton stagnation",
            Error::Inconsistent(_) => "inconsistent result",
            Error::NonIsolatedZero { .. } => "non-isolated zero",
            Error::FormulaNotApplicable(_) => "formula not applicable",
        }
    }
}
