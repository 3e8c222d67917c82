//! Mechanical system description and the dissipation potential.
//!
//! `R` is built from `D` as `R(q, v) = int_0^1 D(q, u v) / u du`, the
//! definite form of the characteristic integral over `s` with `u = e^s`,
//! normalized by `R(q, 0) = 0`. For a sum of terms homogeneous of degree
//! `n` in `v` this reduces to `R = sum D_n / n`, which is the default
//! construction; the quadrature is used for general `D`.

mod checks;
mod dissipation;
mod quadrature;
mod sampling;
mod system;

pub use checks::{
    euler_identity_check, homogeneity_check, positivity_scan, EulerReport, HomogeneityReport, LambdaViolation,
    PositivityReport, Witness, EULER_TOL, HOMOGENEITY_LAMBDAS, HOMOGENEITY_TOL, POSITIVITY_FLOOR,
};
pub use dissipation::{
    ConstructionMode, DissipationSpec, DissipationTerm, GeneralDissipation, PotentialR, QuadratureOutcome, Smoothing,
    TermValue,
};
pub use quadrature::{GaussLegendre, QuadratureConfig};
pub use sampling::{dot, norm, StateSampler};
pub use system::{Field, SystemSpec, MASS_SYMMETRY_TOL};

use crate::expr::{BindError, EvalError, ParseError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("{field}: {source}")]
    Parse { field: String, source: ParseError },
    #[error("{field}: {source}")]
    Bind { field: String, source: BindError },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("quadrature did not converge: change {change:e} at {panels} panels exceeds tolerance {tolerance:e}")]
    Accuracy { change: f64, panels: usize, tolerance: f64 },
    #[error("operation requires {expected} dissipation mode")]
    ModeMismatch { expected: &'static str },
    #[error("mass matrix not symmetric at q = {q:?}: entries ({i},{j}) differ by {diff:e}")]
    Asymmetric { q: Vec<f64>, i: usize, j: usize, diff: f64 },
    #[error("{0}")]
    Invalid(String),
}
