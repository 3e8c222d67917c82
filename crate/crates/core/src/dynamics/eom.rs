//! Explicit second-order form of `F - dR/dv = 0` for `T = v.M(q)v / 2`.
//!
//! With `d/dt(dT/dv) = M a + (sum_k v_k dM/dq_k) v` and
//! `dT/dq_j = v.(dM/dq_j)v / 2`, the accelerations solve
//!
//! ```text
//! M(q) a = dT/dq - (sum_k v_k dM/dq_k) v - dV/dq - dR/dv
//! ```
//!
//! which needs only first derivatives of the mass-matrix entries.

use nalgebra::{DMatrix, DVector};

use super::{DynamicsError, ForceBreakdown, State};
use crate::expr::{value_and_grad, EvalOptions, Wrt};
use crate::model::{dot, SystemSpec};

/// Everything needed to form accelerations and force breakdowns at a state.
pub(crate) struct Assembly {
    pub mass: DMatrix<f64>,
    /// `dT/dq`.
    pub grad_kinetic: Vec<f64>,
    /// `(sum_k v_k dM/dq_k) v`.
    pub mass_rate_v: Vec<f64>,
    /// `dV/dq`.
    pub grad_potential: Vec<f64>,
    /// `dR/dv` as used for forces.
    pub grad_dissipation: Vec<f64>,
}

impl Assembly {
    pub fn new(sys: &SystemSpec, s: &State) -> Result<Self, DynamicsError> {
        let n = sys.dof();
        let wrap = |e| DynamicsError::Model { t: s.t, source: e };
        let mass = sys.mass_matrix_at(&s.q).map_err(wrap)?;
        let zeros = vec![0.0; n];
        let qctx = sys.ctx(&s.q, &zeros);
        // dm[k] = dM/dq_k
        let mut dm = vec![DMatrix::<f64>::zeros(n, n); n];
        for (i, row) in sys.mass_matrix_fields().iter().enumerate() {
            for (j, f) in row.iter().enumerate().skip(i) {
                let (_, g) =
                    value_and_grad(f.expr(), &qctx, Wrt::Coords, EvalOptions::default()).map_err(|e| wrap(e.into()))?;
                for (k, gk) in g.into_iter().enumerate() {
                    dm[k][(i, j)] = gk;
                    dm[k][(j, i)] = gk;
                }
            }
        }
        let v = DVector::from_column_slice(&s.v);
        let grad_kinetic = dm.iter().map(|d| 0.5 * v.dot(&(d * &v))).collect();
        let mut mass_rate = DMatrix::<f64>::zeros(n, n);
        for (k, d) in dm.iter().enumerate() {
            mass_rate += d * s.v[k];
        }
        let mass_rate_v = (mass_rate * &v).iter().copied().collect();
        let (_, grad_potential) =
            value_and_grad(sys.potential_field().expr(), &qctx, Wrt::Coords, EvalOptions::default())
                .map_err(|e| wrap(e.into()))?;
        let grad_dissipation = sys.dissipation().potential().force_gradient(&sys.ctx(&s.q, &s.v)).map_err(wrap)?;
        Ok(Assembly { mass, grad_kinetic, mass_rate_v, grad_potential, grad_dissipation })
    }

    /// Right-hand side `b` of `M a = b`.
    pub fn rhs(&self) -> Vec<f64> {
        (0..self.mass.nrows())
            .map(|j| self.grad_kinetic[j] - self.mass_rate_v[j] - self.grad_potential[j] - self.grad_dissipation[j])
            .collect()
    }

    pub fn solve(&self, s: &State) -> Result<Vec<f64>, DynamicsError> {
        let chol =
            self.mass.clone().cholesky().ok_or_else(|| DynamicsError::NotPositiveDefinite { state: s.clone() })?;
        let a = chol.solve(&DVector::from_vec(self.rhs()));
        Ok(a.iter().copied().collect())
    }

    /// Breakdown given the accelerations `a` at the same state.
    pub fn breakdown(&self, a: &[f64]) -> ForceBreakdown {
        let n = a.len();
        let ma = &self.mass * DVector::from_column_slice(a);
        let conservative: Vec<f64> = self.grad_potential.iter().map(|g| -g).collect();
        let inertial: Vec<f64> = (0..n).map(|j| self.grad_kinetic[j] - ma[j] - self.mass_rate_v[j]).collect();
        let generalized = (0..n).map(|j| conservative[j] + inertial[j]).collect();
        let dissipative = self.grad_dissipation.iter().map(|g| -g).collect();
        ForceBreakdown { conservative, inertial, dissipative, generalized }
    }
}

/// Generalized accelerations at a state.
pub fn accel(sys: &SystemSpec, s: &State) -> Result<Vec<f64>, DynamicsError> {
    Assembly::new(sys, s)?.solve(s)
}

/// Forces at a state, using the accelerations of the equations of motion
/// for the `d/dt(dT/dv)` term.
pub fn force_breakdown(sys: &SystemSpec, s: &State) -> Result<ForceBreakdown, DynamicsError> {
    let asm = Assembly::new(sys, s)?;
    let a = asm.solve(s)?;
    Ok(asm.breakdown(&a))
}

pub(crate) fn power(forces: &ForceBreakdown, v: &[f64]) -> f64 {
    dot(v, &forces.generalized)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Params;
    use crate::model::{DissipationSpec, DissipationTerm};

    fn params(pairs: &[(&str, f64)]) -> Params {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn oscillator(c: f64) -> SystemSpec {
        let d = if c == 0.0 {
            DissipationSpec::none()
        } else {
            DissipationSpec::homogeneous(vec![DissipationTerm::parse("c*v1^2", 2.0).unwrap()])
        };
        SystemSpec::from_sources(&[&["m"]], "0.5*k*q1^2", d, params(&[("m", 1.0), ("k", 1.0), ("c", c)])).unwrap()
    }

    #[test]
    fn oscillator_accelerations() {
        let s = State::new(0.0, vec![1.0], vec![0.0]);
        assert_eq!(accel(&oscillator(0.0), &s).unwrap(), vec![-1.0]);
        let s = State::new(0.0, vec![0.0], vec![1.0]);
        let a = accel(&oscillator(0.2), &s).unwrap();
        assert!((a[0] + 0.2).abs() < 1e-15);
    }

    #[test]
    fn cubic_drag_acceleration() {
        // oracle: finite differences of R = A|v|^3/3 at v = 2 give A|v|v = 2
        let sys = SystemSpec::from_sources(
            &[&["1"]],
            "0",
            DissipationSpec::homogeneous(vec![DissipationTerm::parse("A*abs(v1)^3", 3.0).unwrap()]),
            params(&[("A", 0.5)]),
        )
        .unwrap();
        let r = crate::expr::parse("A*abs(v1)^3/3").unwrap();
        let fd = crate::expr::fd_gradient(&r, &sys.ctx(&[0.0], &[2.0]), Wrt::Velocities, 1e-6).unwrap();
        let a = accel(&sys, &State::new(0.0, vec![0.0], vec![2.0])).unwrap();
        assert!((a[0] + 2.0).abs() < 1e-14);
        assert!((a[0] + fd[0]).abs() < 1e-8);
    }

    #[test]
    fn configuration_dependent_mass() {
        // particle in polar coordinates: M = diag(1, r^2), V = 0.
        // r'' = r th'^2, th'' = -2 r' th' / r
        let sys = SystemSpec::from_sources(&[&["1", "0"], &["0", "q1^2"]], "0", DissipationSpec::none(), Params::new())
            .unwrap();
        let s = State::new(0.0, vec![2.0, 0.3], vec![0.5, 1.5]);
        let a = accel(&sys, &s).unwrap();
        assert!((a[0] - 2.0 * 1.5 * 1.5).abs() < 1e-14);
        assert!((a[1] + 2.0 * 0.5 * 1.5 / 2.0).abs() < 1e-14);
        let f = force_breakdown(&sys, &s).unwrap();
        for j in 0..2 {
            assert!(f.generalized[j].abs() < 1e-14);
        }
    }

    #[test]
    fn indefinite_mass_is_reported_with_state() {
        let sys = SystemSpec::from_sources(&[&["q1"]], "0", DissipationSpec::none(), Params::new()).unwrap();
        let s = State::new(1.5, vec![-1.0], vec![0.0]);
        match accel(&sys, &s) {
            Err(DynamicsError::NotPositiveDefinite { state }) => assert_eq!(state, s),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn breakdown_balances_on_the_equations_of_motion() {
        let sys = oscillator(0.2);
        let s = State::new(0.0, vec![0.3], vec![-0.7]);
        let f = force_breakdown(&sys, &s).unwrap();
        assert!((f.generalized[0] - (f.conservative[0] + f.inertial[0])).abs() == 0.0);
        // F = dR/dv = c v
        assert!((f.generalized[0] - 0.2 * -0.7).abs() < 1e-15);
        assert!((f.dissipative[0] - 0.14).abs() < 1e-15);
        assert!((power(&f, &s.v) - 0.2 * 0.49).abs() < 1e-15);
    }
}
