//! Benchmark systems shipped as code, with closed-form solutions where one
//! exists.

use crate::dynamics::{IntegratorConfig, State};
use crate::expr::Params;
use crate::model::{DissipationSpec, DissipationTerm, ModelError, SystemSpec};

pub const BUILTIN_NAMES: [&str; 5] = ["sho", "damped_sho", "quad_drag_particle", "coulomb_block", "pendulum_drag_2dof"];

type Oracle = fn(&Params, &State, f64) -> State;

/// A ready-to-run benchmark.
#[derive(Debug, Clone)]
pub struct BuiltinSystem {
    pub name: &'static str,
    pub summary: &'static str,
    pub system: SystemSpec,
    pub initial: State,
    pub t_end: f64,
    pub integrator: IntegratorConfig,
    oracle: Option<Oracle>,
}

impl BuiltinSystem {
    pub fn has_reference(&self) -> bool {
        self.oracle.is_some()
    }

    /// Exact state at time `t` from the stored initial condition, for
    /// systems with a closed-form solution.
    pub fn reference_state(&self, t: f64) -> Option<State> {
        self.oracle.map(|f| f(self.system.params(), &self.initial, t))
    }
}

fn params(pairs: &[(&str, f64)]) -> Params {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn p(params: &Params, name: &str) -> f64 {
    params[name]
}

/// Linear oscillator `m q'' + c q' + k q = 0`, underdamped or undamped.
fn oscillator(params: &Params, s: &State, t: f64) -> State {
    let (m, k) = (p(params, "m"), p(params, "k"));
    let c = params.get("c").copied().unwrap_or(0.0);
    let gamma = c / (2.0 * m);
    let wd = (k / m - gamma * gamma).sqrt();
    let tau = t - s.t;
    let (q0, v0) = (s.q[0], s.v[0]);
    let b = (v0 + gamma * q0) / wd;
    let decay = (-gamma * tau).exp();
    let (sn, cs) = (wd * tau).sin_cos();
    let q = decay * (q0 * cs + b * sn);
    let v = decay * ((b * wd - gamma * q0) * cs - (q0 * wd + gamma * b) * sn);
    State::new(t, vec![q], vec![v])
}

/// Free particle under `-A |v| v`: `v = v0 / (1 + (A/m)|v0| t)`.
fn quadratic_drag(params: &Params, s: &State, t: f64) -> State {
    let rate = p(params, "A") / p(params, "m");
    let (q0, v0) = (s.q[0], s.v[0]);
    let growth = 1.0 + rate * v0.abs() * (t - s.t);
    let v = v0 / growth;
    let q = q0 + v0.signum() * growth.ln() / rate;
    State::new(t, vec![q], vec![v])
}

fn one_dof(potential: &str, dissipation: DissipationSpec, params: Params) -> Result<SystemSpec, ModelError> {
    SystemSpec::from_sources(&[&["m"]], potential, dissipation, params)
}

/// Builds the named builtin and then applies `overrides` to its parameters.
pub fn builtin(name: &str, overrides: &Params) -> Result<BuiltinSystem, ModelError> {
    let rk4 = IntegratorConfig::rk4(1e-3);
    let mut b = match name {
        "sho" => BuiltinSystem {
            name: "sho",
            summary: "harmonic oscillator, no dissipation",
            system: one_dof("0.5*k*q1^2", DissipationSpec::none(), params(&[("m", 1.0), ("k", 1.0)]))?,
            initial: State::new(0.0, vec![1.0], vec![0.0]),
            t_end: 10.0,
            integrator: rk4,
            oracle: Some(oscillator),
        },
        "damped_sho" => BuiltinSystem {
            name: "damped_sho",
            summary: "harmonic oscillator with D = c v^2 (linear drag)",
            system: one_dof(
                "0.5*k*q1^2",
                DissipationSpec::homogeneous(vec![DissipationTerm::parse("c*v1^2", 2.0)?]),
                params(&[("m", 1.0), ("k", 1.0), ("c", 0.2)]),
            )?,
            initial: State::new(0.0, vec![1.0], vec![0.0]),
            t_end: 10.0,
            integrator: rk4,
            oracle: Some(oscillator),
        },
        "quad_drag_particle" => BuiltinSystem {
            name: "quad_drag_particle",
            summary: "free particle with D = A |v|^3 (quadratic drag)",
            system: one_dof(
                "0",
                DissipationSpec::homogeneous(vec![DissipationTerm::parse("A*abs(v1)^3", 3.0)?]),
                params(&[("m", 1.0), ("A", 0.5)]),
            )?,
            initial: State::new(0.0, vec![0.0], vec![2.0]),
            t_end: 3.0,
            integrator: rk4,
            oracle: Some(quadratic_drag),
        },
        "coulomb_block" => BuiltinSystem {
            name: "coulomb_block",
            summary: "spring-mounted block with D = mu |v| (dry friction, tanh-regularized force)",
            system: one_dof(
                "0.5*k*q1^2",
                DissipationSpec::homogeneous(vec![DissipationTerm::parse("mu*abs(v1)", 1.0)?.with_smoothing(1e-3)]),
                params(&[("m", 1.0), ("k", 1.0), ("mu", 0.05)]),
            )?,
            initial: State::new(0.0, vec![1.0], vec![0.0]),
            t_end: 10.0,
            integrator: rk4,
            oracle: None,
        },
        "pendulum_drag_2dof" => BuiltinSystem {
            name: "pendulum_drag_2dof",
            summary: "planar double pendulum with D = A (v1^2 + v2^2)^(3/2)",
            system: SystemSpec::from_sources(
                &[&["(m1+m2)*l1^2", "m2*l1*l2*cos(q1-q2)"], &["m2*l1*l2*cos(q1-q2)", "m2*l2^2"]],
                "-(m1+m2)*g*l1*cos(q1) - m2*g*l2*cos(q2)",
                DissipationSpec::homogeneous(vec![DissipationTerm::parse("A*(v1^2+v2^2)^1.5", 3.0)?]),
                params(&[("m1", 1.0), ("m2", 1.0), ("l1", 1.0), ("l2", 1.0), ("g", 9.81), ("A", 0.1)]),
            )?
            .with_labels(vec!["theta1".into(), "theta2".into()]),
            initial: State::new(0.0, vec![0.5, -0.3], vec![0.0, 0.0]),
            t_end: 10.0,
            integrator: IntegratorConfig::rk4(2.5e-4),
            oracle: None,
        },
        other => {
            return Err(ModelError::Invalid(format!(
                "unknown builtin system {other:?} (available: {})",
                BUILTIN_NAMES.join(", ")
            )))
        }
    };
    for (k, v) in overrides {
        b.system.set_param(k, *v)?;
    }
    Ok(b)
}
