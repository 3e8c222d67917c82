mod common;

use common::{damped_q, params};
use rayleigh::cli::builtins::{builtin, BUILTIN_NAMES};
use rayleigh::dynamics::{
    accel, integrate, step_rk4, step_rk45, DynamicsError, IntegratorConfig, Method, State, Trajectory,
};
use rayleigh::expr::Params;
use rayleigh::model::{DissipationSpec, DissipationTerm, SystemSpec};

fn damped(c: f64) -> SystemSpec {
    builtin("damped_sho", &params(&[("c", c)])).unwrap().system
}

fn start() -> State {
    State::new(0.0, vec![1.0], vec![0.0])
}

#[test]
fn accelerations_from_the_documentation() {
    let sho = builtin("sho", &Params::new()).unwrap().system;
    assert_eq!(accel(&sho, &State::new(0.0, vec![1.0], vec![0.0])).unwrap(), vec![-1.0]);
    let a = accel(&damped(0.2), &State::new(0.0, vec![0.0], vec![1.0])).unwrap();
    assert!((a[0] + 0.2).abs() < 1e-15);
    let drag = builtin("quad_drag_particle", &Params::new()).unwrap().system;
    let a = accel(&drag, &State::new(0.0, vec![0.0], vec![2.0])).unwrap();
    // -dR/dv with R = A|v|^3/3, by central differences
    let r = |v: f64| 0.5 * v.abs().powi(3) / 3.0;
    let h = 1e-6;
    let oracle = -(r(2.0 + h) - r(2.0 - h)) / (2.0 * h);
    assert!((a[0] - oracle).abs() < 1e-8 && (a[0] + 2.0).abs() < 1e-15);
}

#[test]
fn rk4_full_period_of_the_oscillator() {
    let sho = builtin("sho", &Params::new()).unwrap().system;
    let period = 2.0 * std::f64::consts::PI;
    let dt = period / 1000.0;
    let mut s = start();
    for _ in 0..1000 {
        s = step_rk4(&sho, &s, dt).unwrap();
    }
    let err = ((s.q[0] - 1.0).powi(2) + s.v[0].powi(2)).sqrt();
    assert!(err <= 1e-9, "{err}");
    assert!(matches!(step_rk4(&sho, &start(), -1.0), Err(DynamicsError::InvalidStep(_))));
}

#[test]
fn rk45_rejects_non_finite_states() {
    let sys = damped(0.2);
    let bad = State::new(0.0, vec![f64::NAN], vec![0.0]);
    let err = step_rk45(&sys, &bad, 0.1, &IntegratorConfig::rk45(1e-6)).unwrap_err();
    assert!(matches!(err, DynamicsError::Divergence { .. }), "{err}");
}

#[test]
fn damped_oscillator_matches_closed_form() {
    let traj = integrate(&damped(0.2), &start(), 10.0, &IntegratorConfig::rk45(1e-10)).unwrap();
    let last = traj.last();
    assert_eq!(last.state.t, 10.0);
    assert!((last.state.q[0] - damped_q(0.2, 10.0)).abs() <= 1e-8);
    let b = builtin("damped_sho", &Params::new()).unwrap();
    for s in traj.samples.iter().step_by(17) {
        let r = b.reference_state(s.state.t).unwrap();
        assert!((s.state.q[0] - r.q[0]).abs() <= 1e-8 && (s.state.v[0] - r.v[0]).abs() <= 1e-8);
    }
}

#[test]
fn quadratic_drag_particle_slows_as_one_over_t() {
    let b = builtin("quad_drag_particle", &Params::new()).unwrap();
    let traj = integrate(&b.system, &b.initial, 3.0, &IntegratorConfig::rk45(1e-10)).unwrap();
    for s in &traj.samples {
        let v = 2.0 / (1.0 + s.state.t);
        assert!((s.state.v[0] - v).abs() <= 1e-8);
    }
    let exact = b.reference_state(3.0).unwrap();
    assert!((traj.last().state.q[0] - exact.q[0]).abs() <= 1e-8);
}

#[test]
fn conservative_pendulum_keeps_its_energy_for_100_periods() {
    let sys = SystemSpec::from_sources(
        &[&["m*l^2"]],
        "-m*g*l*cos(q1)",
        DissipationSpec::none(),
        params(&[("m", 1.0), ("l", 1.0), ("g", 9.81)]),
    )
    .unwrap();
    // period of the small-angle pendulum, stretched a little by the amplitude
    let t_end = 100.0 * 2.0 * std::f64::consts::PI / 9.81f64.sqrt() * 1.02;
    let traj = integrate(&sys, &State::new(0.0, vec![0.5], vec![0.0]), t_end, &IntegratorConfig::rk45(1e-10)).unwrap();
    let drift = traj.energy_drift();
    assert!(drift <= 1e-6, "{drift:e}");
    let reference =
        integrate(&sys, &State::new(0.0, vec![0.5], vec![0.0]), t_end, &IntegratorConfig::rk45(1e-13)).unwrap();
    assert!(reference.energy_drift() < drift.max(1e-12));
}

fn end_state(sys: &SystemSpec, dt: f64) -> State {
    integrate(sys, &start(), 5.0, &IntegratorConfig::rk4(dt)).unwrap().last().state.clone()
}

fn distance(a: &State, b: &State) -> f64 {
    a.q.iter().chain(&a.v).zip(b.q.iter().chain(&b.v)).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[test]
fn rk4_is_fourth_order() {
    let sys = damped(0.2);
    let reference = integrate(&sys, &start(), 5.0, &IntegratorConfig::rk45(1e-13)).unwrap().last().state.clone();
    let e1 = distance(&end_state(&sys, 0.1), &reference);
    let e2 = distance(&end_state(&sys, 0.05), &reference);
    let ratio = e1 / e2;
    assert!((14.0..=18.0).contains(&ratio), "ratio {ratio}");
}

fn reversal_miss(c: f64) -> f64 {
    let sys = damped(c);
    let cfg = IntegratorConfig::rk45(1e-12);
    let fwd = integrate(&sys, &start(), 5.0, &cfg).unwrap();
    let end = &fwd.last().state;
    let back = integrate(&sys, &State::new(0.0, end.q.clone(), end.v.iter().map(|x| -x).collect()), 5.0, &cfg).unwrap();
    let s = &back.last().state;
    distance(&State::new(0.0, s.q.clone(), s.v.iter().map(|x| -x).collect()), &start())
}

#[test]
fn dissipation_breaks_time_reversibility() {
    assert!(reversal_miss(0.2) > 0.01);
    assert!(reversal_miss(0.0) <= 1e-8);
}

#[test]
fn energy_never_increases_on_dissipative_benchmarks() {
    for name in BUILTIN_NAMES {
        let b = builtin(name, &Params::new()).unwrap();
        let traj = integrate(&b.system, &b.initial, b.t_end, &b.integrator).unwrap();
        let slack = 1e-10 * (1.0 + traj.first().diagnostics.total_energy.abs());
        for w in traj.samples.windows(2) {
            assert!(
                w[1].diagnostics.total_energy <= w[0].diagnostics.total_energy + slack,
                "{name} at t = {}",
                w[1].state.t
            );
        }
    }
}

#[test]
fn runs_are_bit_identical() {
    for cfg in [IntegratorConfig::rk4(1e-3), IntegratorConfig::rk45(1e-9)] {
        let b = builtin("pendulum_drag_2dof", &Params::new()).unwrap();
        let a: Trajectory = integrate(&b.system, &b.initial, 2.0, &cfg).unwrap();
        let c = integrate(&b.system, &b.initial, 2.0, &cfg).unwrap();
        assert_eq!(a, c);
    }
}

#[test]
fn sample_every_decimates_but_keeps_the_end() {
    let sys = damped(0.2);
    let cfg = IntegratorConfig { sample_every: 7, ..IntegratorConfig::rk4(1e-2) };
    let traj = integrate(&sys, &start(), 1.0, &cfg).unwrap();
    assert_eq!(traj.first().state, start());
    assert_eq!(traj.last().state.t, 1.0);
    assert_eq!(traj.len(), 100 / 7 + 2);
    assert!(traj.samples.windows(2).all(|w| w[1].state.t > w[0].state.t));
    assert_eq!(traj.meta.method, Method::Rk4);
}

#[test]
fn mis_specified_mass_matrix_is_reported() {
    let sys = SystemSpec::from_sources(&[&["q1"]], "0", DissipationSpec::none(), Params::new()).unwrap();
    let err = integrate(&sys, &State::new(0.0, vec![-1.0], vec![0.0]), 1.0, &IntegratorConfig::rk4(0.1)).unwrap_err();
    assert!(err.to_string().contains("not positive definite"), "{err}");
}

#[test]
fn max_steps_guard() {
    let cfg = IntegratorConfig { max_steps: 10, ..IntegratorConfig::rk4(1e-3) };
    let err = integrate(&damped(0.2), &start(), 1.0, &cfg).unwrap_err();
    assert!(matches!(err, DynamicsError::MaxSteps { .. }), "{err}");
}

#[test]
fn forces_are_recorded_on_request() {
    let cfg = IntegratorConfig { record_forces: true, ..IntegratorConfig::rk4(1e-2) };
    let sys = SystemSpec::from_sources(
        &[&["1"]],
        "0.5*q1^2",
        DissipationSpec::homogeneous(vec![DissipationTerm::parse("0.3*v1^2", 2.0).unwrap()]),
        Params::new(),
    )
    .unwrap();
    let traj = integrate(&sys, &start(), 0.5, &cfg).unwrap();
    for s in &traj.samples {
        let f = s.forces.as_ref().unwrap();
        assert!((f.dissipative[0] + 0.3 * s.state.v[0]).abs() < 1e-15);
        assert_eq!(f.generalized[0], f.conservative[0] + f.inertial[0]);
    }
}
