use serde::Serialize;

use super::AuditError;
use crate::dynamics::{ForceBreakdown, Trajectory};
use crate::expr::{eval_scalar, value_and_grad, Dual, EvalOptions, Wrt};
use crate::model::{dot, SystemSpec};

/// `F = dL/dq - d/dt(dL/dv)` measured along a stored trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneralizedForce {
    pub index: usize,
    pub t: f64,
    /// Spacing to the previous and next samples.
    pub spacing: (f64, f64),
    pub forces: ForceBreakdown,
    /// `W = v . F`.
    pub power: f64,
}

/// `(dT/dq, dV/dq)` by the derivative engine, from `T = v.M(q)v/2`
/// evaluated with coordinate duals.
pub(crate) fn configuration_gradients(
    sys: &SystemSpec,
    q: &[f64],
    v: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), AuditError> {
    let n = sys.dof();
    let qd: Vec<Dual> = q.iter().enumerate().map(|(i, &x)| Dual::variable(x, i, n)).collect();
    let vd: Vec<Dual> = vec![Dual::constant(0.0); n];
    let mut grad_t = vec![0.0; n];
    for (i, row) in sys.mass_matrix_fields().iter().enumerate() {
        for (j, f) in row.iter().enumerate() {
            let m = eval_scalar(f.expr(), &qd, &vd, sys.params(), EvalOptions::default())
                .map_err(|e| AuditError::Model(e.into()))?;
            for (k, g) in m.gradient(n).into_iter().enumerate() {
                grad_t[k] += 0.5 * v[i] * v[j] * g;
            }
        }
    }
    let zeros = vec![0.0; n];
    let (_, grad_v) =
        value_and_grad(sys.potential_field().expr(), &sys.ctx(q, &zeros), Wrt::Coords, EvalOptions::default())
            .map_err(|e| AuditError::Model(e.into()))?;
    Ok((grad_t, grad_v))
}

fn momentum(sys: &SystemSpec, q: &[f64], v: &[f64]) -> Result<Vec<f64>, AuditError> {
    let m = sys.mass_matrix_at(q)?;
    Ok((0..v.len()).map(|i| (0..v.len()).map(|j| m[(i, j)] * v[j]).sum()).collect())
}

/// Generalized force at interior sample `k`, with `d/dt(M v)` from the
/// three-point (possibly nonuniform) central difference over the stored
/// samples. The equations of motion are not consulted.
pub fn generalized_force(sys: &SystemSpec, traj: &Trajectory, k: usize) -> Result<GeneralizedForce, AuditError> {
    if k == 0 || k + 1 >= traj.len() {
        return Err(AuditError::IndexOutOfRange { index: k, len: traj.len() });
    }
    let [prev, cur, next] = [&traj.samples[k - 1], &traj.samples[k], &traj.samples[k + 1]].map(|s| &s.state);
    let h1 = cur.t - prev.t;
    let h2 = next.t - cur.t;
    let p_prev = momentum(sys, &prev.q, &prev.v)?;
    let p_cur = momentum(sys, &cur.q, &cur.v)?;
    let p_next = momentum(sys, &next.q, &next.v)?;
    let (w_prev, w_cur, w_next) = (-h2 / (h1 * (h1 + h2)), (h2 - h1) / (h1 * h2), h1 / (h2 * (h1 + h2)));
    let (grad_t, grad_v) = configuration_gradients(sys, &cur.q, &cur.v)?;
    let n = sys.dof();
    let conservative: Vec<f64> = grad_v.iter().map(|g| -g).collect();
    let inertial: Vec<f64> =
        (0..n).map(|j| grad_t[j] - (w_prev * p_prev[j] + w_cur * p_cur[j] + w_next * p_next[j])).collect();
    let generalized: Vec<f64> = (0..n).map(|j| conservative[j] + inertial[j]).collect();
    let dissipative =
        sys.dissipation().potential().force_gradient(&sys.ctx(&cur.q, &cur.v))?.into_iter().map(|g| -g).collect();
    let power = dot(&cur.v, &generalized);
    Ok(GeneralizedForce {
        index: k,
        t: cur.t,
        spacing: (h1, h2),
        forces: ForceBreakdown { conservative, inertial, dissipative, generalized },
        power,
    })
}
