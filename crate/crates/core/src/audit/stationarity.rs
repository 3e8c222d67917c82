//! Discrete check of the reduced-dissipation principle: at the true velocity
//! `v`, `R~(w) = R(q, w) - w.F` is stationary in `w` once `F` is frozen.

use serde::Serialize;

use super::{generalized_force, AuditError};
use crate::dynamics::{State, Trajectory};
use crate::expr::{EvalContext, Params};
use crate::model::{dot, norm, DissipationSpec, StateSampler, SystemSpec};

/// Probe radii `|delta|`.
pub const PROBE_MAGNITUDES: [f64; 3] = [1e-1, 1e-2, 1e-3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeDelta {
    pub norm: f64,
    /// `R~(v + delta) - R~(v)`.
    pub reduced_change: f64,
    /// The same with the linear residual term `(dR/dv - F).delta` removed.
    pub second_order: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SlopeStatus {
    Tested,
    Skipped,
    NotRequested,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeTest {
    pub status: SlopeStatus,
    /// Per-direction log-log slopes of `|second_order|` against `|delta|`.
    pub slopes: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl SlopeTest {
    fn skipped(reason: impl Into<String>) -> Self {
        SlopeTest { status: SlopeStatus::Skipped, slopes: vec![], reason: Some(reason.into()) }
    }

    pub fn within(&self, lo: f64, hi: f64) -> bool {
        self.slopes.iter().all(|s| (lo..=hi).contains(s))
    }

    pub fn min_slope(&self) -> Option<f64> {
        self.slopes.iter().copied().reduce(f64::min)
    }

    pub fn max_slope(&self) -> Option<f64> {
        self.slopes.iter().copied().reduce(f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReducedDissipationReport {
    pub index: usize,
    pub state: State,
    /// Larger of the two sample spacings used for `d/dt(dL/dv)`.
    pub spacing: f64,
    pub frozen_force: Vec<f64>,
    /// `dR/dv(q, v) - F`.
    pub gradient_residual: Vec<f64>,
    pub residual_norm: f64,
    /// Sorted by `norm`.
    pub probe_deltas: Vec<ProbeDelta>,
    pub slope_test: SlopeTest,
}

/// Probe outcome at a given state and frozen force.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeResult {
    pub gradient_residual: Vec<f64>,
    pub probe_deltas: Vec<ProbeDelta>,
    pub slope_test: SlopeTest,
}

fn fit_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mx, my) = points.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Reason the expansion of `R` around `v` cannot be trusted over the probe
/// radii, if any.
fn non_smooth_reason(spec: &DissipationSpec, v: &[f64]) -> Option<String> {
    let radius = PROBE_MAGNITUDES[0].max(10.0 * spec.max_smooth_eps());
    if spec.has_kink() {
        let closest = v.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
        if closest < radius {
            return Some(format!("R has a kink within {radius} of v (min |v_j| = {closest:e})"));
        }
    }
    if spec.has_fractional_power() && norm(v) < radius {
        return Some(format!("R is not smooth at v = 0 and |v| = {:e} < {radius}", norm(v)));
    }
    None
}

/// Samples `R~(v + delta) - R~(v)` along `probes` seeded random directions
/// at the radii in [`PROBE_MAGNITUDES`].
pub fn reduced_dissipation_probe(
    spec: &DissipationSpec,
    params: &Params,
    q: &[f64],
    v: &[f64],
    frozen_force: &[f64],
    probes: usize,
    seed: u64,
) -> Result<ProbeResult, AuditError> {
    let potential = spec.potential();
    let ctx = EvalContext::new(q, v, params);
    let grad = potential.force_gradient(&ctx)?;
    let gradient_residual: Vec<f64> = grad.iter().zip(frozen_force).map(|(g, f)| g - f).collect();
    if probes == 0 {
        return Ok(ProbeResult {
            gradient_residual,
            probe_deltas: vec![],
            slope_test: SlopeTest { status: SlopeStatus::NotRequested, slopes: vec![], reason: None },
        });
    }
    let r0 = potential.eval(&ctx)?;
    let reduced0 = r0 - dot(v, frozen_force);
    let mut sampler = StateSampler::new(v.len(), seed);
    let mut probe_deltas = Vec::with_capacity(probes * PROBE_MAGNITUDES.len());
    let mut per_direction = Vec::with_capacity(probes);
    for _ in 0..probes {
        let dir = sampler.direction();
        let mut points = Vec::with_capacity(PROBE_MAGNITUDES.len());
        for &mag in &PROBE_MAGNITUDES {
            let delta: Vec<f64> = dir.iter().map(|d| d * mag).collect();
            let w: Vec<f64> = v.iter().zip(&delta).map(|(a, b)| a + b).collect();
            let r = potential.eval(&EvalContext::new(q, &w, params))?;
            let reduced_change = (r - dot(&w, frozen_force)) - reduced0;
            let second_order = reduced_change - dot(&gradient_residual, &delta);
            probe_deltas.push(ProbeDelta { norm: mag, reduced_change, second_order });
            points.push((mag, second_order));
        }
        per_direction.push(points);
    }
    probe_deltas.sort_by(|a, b| a.norm.total_cmp(&b.norm));

    let slope_test = if let Some(reason) = non_smooth_reason(spec, v) {
        SlopeTest::skipped(reason)
    } else {
        let floor = 1e-13 * (1.0 + r0.abs());
        let largest = per_direction.iter().map(|p| p[0].1.abs()).fold(0.0, f64::max);
        if largest <= floor {
            SlopeTest::skipped(format!("second-order change {largest:e} is at rounding level"))
        } else {
            let slopes = per_direction
                .iter()
                .map(|pts| {
                    let logs: Vec<(f64, f64)> =
                        pts.iter().map(|(m, y)| (m.log10(), y.abs().max(f64::MIN_POSITIVE).log10())).collect();
                    fit_slope(&logs)
                })
                .collect();
            SlopeTest { status: SlopeStatus::Tested, slopes, reason: None }
        }
    };
    Ok(ProbeResult { gradient_residual, probe_deltas, slope_test })
}

/// Freezes `F` from the trajectory at sample `k` and checks that `R~` is
/// stationary at the recorded velocity.
pub fn stationarity_audit(
    sys: &SystemSpec,
    traj: &Trajectory,
    k: usize,
    probes: usize,
    seed: u64,
) -> Result<ReducedDissipationReport, AuditError> {
    let gf = generalized_force(sys, traj, k)?;
    let state = traj.samples[k].state.clone();
    let frozen_force = gf.forces.generalized;
    let probe =
        reduced_dissipation_probe(sys.dissipation(), sys.params(), &state.q, &state.v, &frozen_force, probes, seed)?;
    let residual_norm = probe.gradient_residual.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    Ok(ReducedDissipationReport {
        index: k,
        state,
        spacing: gf.spacing.0.max(gf.spacing.1),
        frozen_force,
        gradient_residual: probe.gradient_residual,
        residual_norm,
        probe_deltas: probe.probe_deltas,
        slope_test: probe.slope_test,
    })
}
