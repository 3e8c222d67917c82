use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{energy_balance_audit, stationarity_audit, AuditError, EnergyBalance, SlopeStatus};
use crate::dynamics::Trajectory;
use crate::model::{euler_identity_check, positivity_scan, EulerReport, PositivityReport, SystemSpec};

/// Spacing at which `stationarity` applies unscaled.
const REFERENCE_SPACING: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditTolerances {
    /// Energy defect relative to `1 + |H(t_0)|`.
    pub energy: f64,
    pub euler: f64,
    /// Gradient residual bound at sample spacing `1e-3`; scaled by
    /// `(h / 1e-3)^2` for coarser spacing.
    pub stationarity: f64,
    pub slope_min: f64,
    pub slope_max: f64,
    /// `H` drift relative to `1 + |H(t_0)|` when `D` vanishes.
    pub conservative: f64,
    pub check_samples: usize,
    pub seed: u64,
    pub probes: usize,
    pub stationarity_samples: usize,
}

impl Default for AuditTolerances {
    fn default() -> Self {
        AuditTolerances {
            energy: 1e-6,
            euler: 1e-8,
            stationarity: 1e-5,
            slope_min: 1.8,
            slope_max: 2.2,
            conservative: 1e-9,
            check_samples: 100,
            seed: 0,
            probes: 4,
            stationarity_samples: 5,
        }
    }
}

impl AuditTolerances {
    pub fn validate(&self) -> Result<(), String> {
        for (name, x) in [
            ("energy", self.energy),
            ("euler", self.euler),
            ("stationarity", self.stationarity),
            ("conservative", self.conservative),
        ] {
            if !(x.is_finite() && x > 0.0) {
                return Err(format!("{name} tolerance must be positive, got {x}"));
            }
        }
        if !(self.slope_min.is_finite() && self.slope_max.is_finite() && self.slope_min < self.slope_max) {
            return Err(format!("slope window [{}, {}] is empty", self.slope_min, self.slope_max));
        }
        if self.check_samples == 0 {
            return Err("check_samples must be at least 1".into());
        }
        Ok(())
    }

    /// Residual bound for sample spacing `h`.
    pub fn stationarity_bound(&self, h: f64) -> f64 {
        self.stationarity * (h / REFERENCE_SPACING).powi(2).max(1.0)
    }
}

/// An audit section, or the error that prevented it.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Section<T> {
    Done(T),
    Failed { error: String, pass: bool },
}

pub trait Verdict {
    fn pass(&self) -> bool;
}

impl<T: Verdict> Section<T> {
    fn from_result<E: std::fmt::Display>(r: Result<T, E>) -> Self {
        match r {
            Ok(x) => Section::Done(x),
            Err(e) => Section::Failed { error: e.to_string(), pass: false },
        }
    }

    pub fn pass(&self) -> bool {
        match self {
            Section::Done(x) => x.pass(),
            Section::Failed { .. } => false,
        }
    }

    pub fn done(&self) -> Option<&T> {
        match self {
            Section::Done(x) => Some(x),
            Section::Failed { .. } => None,
        }
    }

    pub fn error(&self) -> Option<&str> {
        match self {
            Section::Done(_) => None,
            Section::Failed { error, .. } => Some(error),
        }
    }
}

impl Verdict for EnergyBalance {
    fn pass(&self) -> bool {
        self.pass
    }
}

impl Verdict for EulerReport {
    fn pass(&self) -> bool {
        self.pass
    }
}

impl Verdict for PositivityReport {
    fn pass(&self) -> bool {
        self.pass
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaritySample {
    pub index: usize,
    pub t: f64,
    pub spacing: f64,
    pub gradient_residual: Vec<f64>,
    pub residual_norm: f64,
    pub allowed: f64,
    pub slope_status: SlopeStatus,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub slopes: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope_note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaritySection {
    pub samples: Vec<StationaritySample>,
    pub max_gradient_residual: f64,
    pub slopes_tested: usize,
    pub min_slope: Option<f64>,
    pub max_slope: Option<f64>,
    /// At least one slope was measured and every measured slope fell in
    /// the window.
    pub quadratic_growth_verified: bool,
    pub pass: bool,
}

impl Verdict for StationaritySection {
    fn pass(&self) -> bool {
        self.pass
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConservativeLimit {
    #[serde(rename = "H_drift")]
    pub h_drift: f64,
    pub pass: bool,
}

impl Verdict for ConservativeLimit {
    fn pass(&self) -> bool {
        self.pass
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub energy_balance: Section<EnergyBalance>,
    pub euler_identity: Section<EulerReport>,
    pub positivity: Section<PositivityReport>,
    pub stationarity: Section<StationaritySection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conservative_limit: Option<Section<ConservativeLimit>>,
    pub tolerances: AuditTolerances,
    pub pass: bool,
}

/// `count` evenly spaced interior indices of a trajectory with `len`
/// samples.
pub fn stationarity_indices(len: usize, count: usize) -> Vec<usize> {
    if len < 3 {
        return vec![];
    }
    let mut idx: Vec<usize> = (0..count)
        .map(|i| {
            let x = ((i + 1) * (len - 1)) as f64 / (count + 1) as f64;
            (x.round() as usize).clamp(1, len - 2)
        })
        .collect();
    idx.dedup();
    idx
}

fn stationarity_section(
    sys: &SystemSpec,
    traj: &Trajectory,
    tol: &AuditTolerances,
) -> Result<StationaritySection, AuditError> {
    if traj.len() < 3 {
        return Err(AuditError::TooFewSamples { needed: 3, got: traj.len() });
    }
    let samples: Vec<StationaritySample> = stationarity_indices(traj.len(), tol.stationarity_samples)
        .into_par_iter()
        .enumerate()
        .map(|(i, k)| {
            let r = stationarity_audit(sys, traj, k, tol.probes, tol.seed.wrapping_add(i as u64))?;
            Ok(StationaritySample {
                index: k,
                t: r.state.t,
                spacing: r.spacing,
                gradient_residual: r.gradient_residual,
                residual_norm: r.residual_norm,
                allowed: tol.stationarity_bound(r.spacing),
                slope_status: r.slope_test.status,
                slopes: r.slope_test.slopes,
                slope_note: r.slope_test.reason,
            })
        })
        .collect::<Result<_, AuditError>>()?;
    let residuals_ok = samples.iter().all(|s| s.residual_norm <= s.allowed);
    let all_slopes: Vec<f64> = samples.iter().flat_map(|s| s.slopes.iter().copied()).collect();
    let max_gradient_residual = samples.iter().map(|s| s.residual_norm).fold(0.0, f64::max);
    let slopes_ok = all_slopes.iter().all(|s| (tol.slope_min..=tol.slope_max).contains(s));
    Ok(StationaritySection {
        samples,
        max_gradient_residual,
        slopes_tested: all_slopes.len(),
        min_slope: all_slopes.iter().copied().reduce(f64::min),
        max_slope: all_slopes.iter().copied().reduce(f64::max),
        quadratic_growth_verified: !all_slopes.is_empty() && slopes_ok,
        pass: residuals_ok && slopes_ok,
    })
}

fn conservative_limit(traj: &Trajectory, tol: &AuditTolerances) -> ConservativeLimit {
    let h0 = traj.first().diagnostics.total_energy;
    let h_drift = traj.energy_drift();
    ConservativeLimit { h_drift, pass: h_drift <= tol.conservative * (1.0 + h0.abs()) }
}

/// Runs every audit section; a failing section never prevents the others.
pub fn full_audit(sys: &SystemSpec, traj: &Trajectory, tol: &AuditTolerances) -> AuditReport {
    let energy_balance = Section::from_result(energy_balance_audit(traj, tol.energy));
    let euler_identity = Section::from_result(
        euler_identity_check(sys.dissipation(), sys.dof(), sys.params(), tol.check_samples, tol.seed).map(|mut r| {
            r.pass = r.max_violation <= tol.euler;
            r
        }),
    );
    let positivity =
        Section::from_result(positivity_scan(sys.dissipation(), sys.dof(), sys.params(), tol.check_samples, tol.seed));
    let stationarity = Section::from_result(stationarity_section(sys, traj, tol));
    let conservative = sys.dissipation().is_empty()
        || (!traj.is_empty() && traj.samples.iter().all(|s| s.diagnostics.dissipation == 0.0));
    let conservative_limit = conservative.then(|| {
        if traj.is_empty() {
            Section::Failed { error: "empty trajectory".into(), pass: false }
        } else {
            Section::Done(conservative_limit(traj, tol))
        }
    });
    let pass = energy_balance.pass()
        && euler_identity.pass()
        && positivity.pass()
        && stationarity.pass()
        && conservative_limit.as_ref().is_none_or(|c| c.pass());
    AuditReport {
        energy_balance,
        euler_identity,
        positivity,
        stationarity,
        conservative_limit,
        tolerances: tol.clone(),
        pass,
    }
}
