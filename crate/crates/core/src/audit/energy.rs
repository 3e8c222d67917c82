use serde::Serialize;

use super::AuditError;
use crate::dynamics::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureRule {
    /// Composite Simpson on uniformly spaced samples.
    Simpson,
    /// Per-interval integral of the cubic through the four nearest samples.
    LocalCubic,
    Trapezoid,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyBalance {
    /// `max_k |H(t_k) - H(t_0) + int_{t_0}^{t_k} D dt|`.
    pub max_defect: f64,
    pub t_at_max: f64,
    /// `max_defect / (1 + |H(t_0)|)`.
    pub relative_defect: f64,
    pub rule: QuadratureRule,
    pub pass: bool,
}

fn is_uniform(t: &[f64]) -> bool {
    let h = t[1] - t[0];
    t.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs())
}

/// Integral over `[t[i], t[i+1]]` of the cubic interpolating the four
/// samples nearest to the interval (two-point Gauss–Legendre is exact).
fn local_cubic(t: &[f64], f: &[f64], i: usize) -> f64 {
    let n = t.len();
    let j0 = i.saturating_sub(1).min(n - 4);
    let idx = [j0, j0 + 1, j0 + 2, j0 + 3];
    let interp = |x: f64| {
        idx.iter()
            .map(|&a| {
                let basis: f64 = idx.iter().filter(|&&b| b != a).map(|&b| (x - t[b]) / (t[a] - t[b])).product();
                basis * f[a]
            })
            .sum::<f64>()
    };
    let (a, b) = (t[i], t[i + 1]);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let g = half / 3f64.sqrt();
    half * (interp(mid - g) + interp(mid + g))
}

/// Running integral `int_{t_0}^{t_k} f dt` at every sample: Simpson on
/// uniform spacing, local cubics otherwise, trapezoid below four samples.
pub fn cumulative_integral(t: &[f64], f: &[f64]) -> (Vec<f64>, QuadratureRule) {
    cumulative_integral_with(t, f, QuadratureRule::Simpson)
}

/// Running integral with a preferred rule. Simpson falls back to local
/// cubics on nonuniform spacing, and both fall back to trapezoid below four
/// samples; the rule actually used is returned.
pub fn cumulative_integral_with(t: &[f64], f: &[f64], rule: QuadratureRule) -> (Vec<f64>, QuadratureRule) {
    let n = t.len();
    let rule = match rule {
        _ if n < 4 => QuadratureRule::Trapezoid,
        QuadratureRule::Simpson if !is_uniform(t) => QuadratureRule::LocalCubic,
        r => r,
    };
    let mut acc = vec![0.0; n];
    match rule {
        QuadratureRule::Trapezoid => {
            for k in 1..n {
                acc[k] = acc[k - 1] + 0.5 * (t[k] - t[k - 1]) * (f[k] + f[k - 1]);
            }
        }
        QuadratureRule::Simpson => {
            let h = t[1] - t[0];
            for k in 1..n {
                acc[k] = if k % 2 == 0 {
                    acc[k - 2] + h / 3.0 * (f[k - 2] + 4.0 * f[k - 1] + f[k])
                } else {
                    acc[k - 1] + local_cubic(t, f, k - 1)
                };
            }
        }
        QuadratureRule::LocalCubic => {
            for k in 1..n {
                acc[k] = acc[k - 1] + local_cubic(t, f, k - 1);
            }
        }
    }
    (acc, rule)
}

/// Checks `H(t) - H(t_0) + int D dt = 0` along the trajectory.
pub fn energy_balance_audit(traj: &Trajectory, tol: f64) -> Result<EnergyBalance, AuditError> {
    energy_balance_with(traj, tol, QuadratureRule::Simpson)
}

/// [`energy_balance_audit`] with a preferred accumulation rule (see
/// [`cumulative_integral_with`]).
pub fn energy_balance_with(traj: &Trajectory, tol: f64, rule: QuadratureRule) -> Result<EnergyBalance, AuditError> {
    if traj.len() < 3 {
        return Err(AuditError::TooFewSamples { needed: 3, got: traj.len() });
    }
    let t = traj.times();
    let d: Vec<f64> = traj.samples.iter().map(|s| s.diagnostics.dissipation).collect();
    let (dissipated, rule) = cumulative_integral_with(&t, &d, rule);
    let h0 = traj.first().diagnostics.total_energy;
    let (mut max_defect, mut t_at_max) = (0.0f64, t[0]);
    for (k, s) in traj.samples.iter().enumerate() {
        let defect = (s.diagnostics.total_energy - h0 + dissipated[k]).abs();
        if defect > max_defect {
            max_defect = defect;
            t_at_max = t[k];
        }
    }
    let relative_defect = max_defect / (1.0 + h0.abs());
    Ok(EnergyBalance { max_defect, t_at_max, relative_defect, rule, pass: relative_defect <= tol })
}
