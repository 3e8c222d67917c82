//! Lagrange–Rayleigh equations of motion and their time integration.

mod eom;
mod integrator;
mod trajectory;

pub use eom::{accel, force_breakdown};
pub use integrator::{diagnostics, integrate, step_control, step_rk4, step_rk45, Rk45Step};
pub use trajectory::{
    Diagnostics, ForceBreakdown, IntegratorConfig, IntegratorMeta, Method, Sample, State, Trajectory,
};

use crate::model::ModelError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error("mass matrix not positive definite at state t = {}, q = {:?}", state.t, state.q)]
    NotPositiveDefinite { state: State },
    #[error("at t = {t}: {source}")]
    Model { t: f64, source: ModelError },
    #[error("step size must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("invalid integration request: {0}")]
    InvalidConfig(String),
    #[error("solution diverged (non-finite state) at t = {t} with step {dt}")]
    Divergence { t: f64, dt: f64 },
    #[error("step size underflow ({dt:e}) at t = {t}; the problem looks stiff")]
    StepUnderflow { t: f64, dt: f64 },
    #[error("exceeded {steps} steps at t = {t}")]
    MaxSteps { steps: usize, t: f64 },
}
