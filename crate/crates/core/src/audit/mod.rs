//! Audits of computed trajectories against the energy law `dH/dt = -D`,
//! the conservative limit, and stationarity of the reduced dissipation
//! potential `R - W` at fixed generalized force.

mod energy;
mod forces;
mod report;
mod stationarity;

pub use energy::{
    cumulative_integral, cumulative_integral_with, energy_balance_audit, energy_balance_with, EnergyBalance,
    QuadratureRule,
};
pub use forces::{generalized_force, GeneralizedForce};
pub use report::{
    full_audit, stationarity_indices, AuditReport, AuditTolerances, ConservativeLimit, Section, StationaritySample,
    StationaritySection,
};
pub use stationarity::{
    reduced_dissipation_probe, stationarity_audit, ProbeDelta, ProbeResult, ReducedDissipationReport, SlopeStatus,
    SlopeTest, PROBE_MAGNITUDES,
};

use crate::dynamics::DynamicsError;
use crate::model::ModelError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AuditError {
    #[error("audit needs at least {needed} samples, trajectory has {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("sample index {index} is not interior to a trajectory of {len} samples")]
    IndexOutOfRange { index: usize, len: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}
