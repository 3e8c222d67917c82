use super::eom::{accel, power, Assembly};
use super::{Diagnostics, DynamicsError, IntegratorConfig, IntegratorMeta, Method, Sample, State, Trajectory};
use crate::model::{ModelError, SystemSpec};

/// Derivative of the first-order system `(q, v)' = (v, a)`.
fn rhs(sys: &SystemSpec, s: &State) -> Result<Vec<f64>, DynamicsError> {
    let a = accel(sys, s)?;
    Ok(s.v.iter().copied().chain(a).collect())
}

fn pack(s: &State) -> Vec<f64> {
    s.q.iter().chain(&s.v).copied().collect()
}

fn unpack(t: f64, y: &[f64]) -> State {
    let n = y.len() / 2;
    State { t, q: y[..n].to_vec(), v: y[n..].to_vec() }
}

fn axpy(y: &[f64], h: f64, terms: &[(f64, &[f64])]) -> Vec<f64> {
    (0..y.len()).map(|i| y[i] + h * terms.iter().map(|(c, k)| c * k[i]).sum::<f64>()).collect()
}

fn check_finite(s: &State, dt: f64) -> Result<(), DynamicsError> {
    if s.is_finite() {
        Ok(())
    } else {
        Err(DynamicsError::Divergence { t: s.t, dt })
    }
}

/// One classical fourth-order Runge–Kutta step.
pub fn step_rk4(sys: &SystemSpec, s: &State, dt: f64) -> Result<State, DynamicsError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(DynamicsError::InvalidStep(dt));
    }
    check_finite(s, dt)?;
    let y = pack(s);
    let k1 = rhs(sys, s)?;
    let k2 = rhs(sys, &unpack(s.t + 0.5 * dt, &axpy(&y, 0.5 * dt, &[(1.0, &k1)])))?;
    let k3 = rhs(sys, &unpack(s.t + 0.5 * dt, &axpy(&y, 0.5 * dt, &[(1.0, &k2)])))?;
    let k4 = rhs(sys, &unpack(s.t + dt, &axpy(&y, dt, &[(1.0, &k3)])))?;
    let y1 = axpy(&y, dt / 6.0, &[(1.0, &k1), (2.0, &k2), (2.0, &k3), (1.0, &k4)]);
    let next = unpack(s.t + dt, &y1);
    check_finite(&next, dt)?;
    Ok(next)
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] =
    [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

/// Outcome of one attempted adaptive step.
#[derive(Debug, Clone, PartialEq)]
pub struct Rk45Step {
    /// The new state when accepted, otherwise the unchanged input state.
    pub state: State,
    pub dt_next: f64,
    pub accepted: bool,
    /// Weighted RMS error estimate of the attempt.
    pub error: f64,
}

/// Step acceptance and size update: accept iff `err <= 1`, next step
/// `dt * min(5, max(0.2, 0.9 err^(-1/5)))`.
pub fn step_control(err: f64, dt: f64) -> (bool, f64) {
    let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
    (err <= 1.0, dt * factor)
}

/// One embedded Dormand–Prince 4(5) step; the fifth-order solution is
/// propagated.
pub fn step_rk45(sys: &SystemSpec, s: &State, dt_try: f64, cfg: &IntegratorConfig) -> Result<Rk45Step, DynamicsError> {
    if !(dt_try > 0.0 && dt_try.is_finite()) {
        return Err(DynamicsError::InvalidStep(dt_try));
    }
    check_finite(s, dt_try)?;
    let y = pack(s);
    let h = dt_try;
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
    for stage in 0..7 {
        let terms: Vec<(f64, &[f64])> = (0..stage).map(|j| (A[stage][j], k[j].as_slice())).collect();
        let ys = axpy(&y, h, &terms);
        let st = unpack(s.t + C[stage] * h, &ys);
        check_finite(&st, h)?;
        k.push(rhs(sys, &st)?);
    }
    let all: Vec<(f64, &[f64])> = (0..7).map(|j| (B5[j], k[j].as_slice())).collect();
    let y5 = axpy(&y, h, &all);
    let mut sum = 0.0;
    for i in 0..y.len() {
        let e = h * (0..7).map(|j| (B5[j] - B4[j]) * k[j][i]).sum::<f64>();
        let scale = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(y5[i].abs());
        sum += (e / scale).powi(2);
    }
    let err = (sum / y.len() as f64).sqrt();
    if !err.is_finite() {
        return Err(DynamicsError::Divergence { t: s.t, dt: h });
    }
    let (accepted, dt_next) = step_control(err, h);
    let state = if accepted { unpack(s.t + h, &y5) } else { s.clone() };
    if accepted {
        check_finite(&state, h)?;
    }
    Ok(Rk45Step { state, dt_next, accepted, error: err })
}

/// Diagnostics at a state, plus the force breakdown that produced `W`.
pub fn diagnostics(sys: &SystemSpec, s: &State) -> Result<(Diagnostics, super::ForceBreakdown), DynamicsError> {
    let wrap = |e: ModelError| DynamicsError::Model { t: s.t, source: e };
    let asm = Assembly::new(sys, s)?;
    let a = asm.solve(s)?;
    let forces = asm.breakdown(&a);
    let kinetic = 0.5 * crate::model::dot(&s.v, (&asm.mass * nalgebra::DVector::from_column_slice(&s.v)).as_slice());
    let potential = sys.potential_energy(&s.q).map_err(wrap)?;
    let ctx = sys.ctx(&s.q, &s.v);
    let dissipation = sys.dissipation().eval_d(&ctx).map_err(wrap)?;
    let dissipation_potential = sys.dissipation().potential().eval(&ctx).map_err(wrap)?;
    let diag = Diagnostics {
        total_energy: kinetic + potential,
        kinetic,
        potential,
        dissipation,
        dissipation_potential,
        power: power(&forces, &s.v),
        lagrangian: kinetic - potential,
    };
    Ok((diag, forces))
}

fn sample(sys: &SystemSpec, s: State, record_forces: bool) -> Result<Sample, DynamicsError> {
    let (diagnostics, forces) = diagnostics(sys, &s)?;
    Ok(Sample { state: s, diagnostics, forces: record_forces.then_some(forces) })
}

/// Integrates from `init` to exactly `t_end`.
pub fn integrate(
    sys: &SystemSpec,
    init: &State,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory, DynamicsError> {
    cfg.validate().map_err(DynamicsError::InvalidConfig)?;
    if init.q.len() != sys.dof() || init.v.len() != sys.dof() {
        return Err(DynamicsError::InvalidConfig(format!(
            "initial state has {} coordinates and {} velocities, system has {} degrees of freedom",
            init.q.len(),
            init.v.len(),
            sys.dof()
        )));
    }
    if !init.is_finite() {
        return Err(DynamicsError::InvalidConfig("initial state is not finite".into()));
    }
    if !t_end.is_finite() || t_end <= init.t {
        return Err(DynamicsError::InvalidConfig(format!("t_end = {t_end} must exceed t0 = {}", init.t)));
    }
    let mut samples = vec![sample(sys, init.clone(), cfg.record_forces)?];
    let mut meta = IntegratorMeta {
        method: cfg.method,
        steps_taken: 0,
        steps_rejected: 0,
        dt: cfg.dt,
        rel_tol: cfg.rel_tol,
        abs_tol: cfg.abs_tol,
        sample_every: cfg.sample_every,
    };
    let t0 = init.t;
    let mut s = init.clone();
    match cfg.method {
        Method::Rk4 => {
            let span = t_end - t0;
            let n = ((span / cfg.dt) - 1e-9).ceil().max(1.0) as usize;
            if n > cfg.max_steps {
                return Err(DynamicsError::MaxSteps { steps: cfg.max_steps, t: t0 });
            }
            for k in 1..=n {
                let t_next = if k == n { t_end } else { t0 + k as f64 * cfg.dt };
                let mut next = step_rk4(sys, &s, t_next - s.t)?;
                next.t = t_next;
                s = next;
                meta.steps_taken += 1;
                if k % cfg.sample_every == 0 || k == n {
                    samples.push(sample(sys, s.clone(), cfg.record_forces)?);
                }
            }
        }
        Method::Rk45 => {
            let mut h = cfg.dt.min(t_end - t0);
            let mut attempts = 0usize;
            loop {
                let remaining = t_end - s.t;
                let last = h >= remaining * (1.0 - 1e-12);
                if last {
                    h = remaining;
                }
                attempts += 1;
                if attempts > cfg.max_steps {
                    return Err(DynamicsError::MaxSteps { steps: cfg.max_steps, t: s.t });
                }
                let step = step_rk45(sys, &s, h, cfg)?;
                if step.accepted {
                    s = step.state;
                    if last {
                        s.t = t_end;
                    }
                    meta.steps_taken += 1;
                    if meta.steps_taken.is_multiple_of(cfg.sample_every) || last {
                        samples.push(sample(sys, s.clone(), cfg.record_forces)?);
                    }
                    if last {
                        break;
                    }
                } else {
                    meta.steps_rejected += 1;
                }
                h = step.dt_next;
                if h < 1e-14 * (1.0 + s.t.abs()) {
                    return Err(DynamicsError::StepUnderflow { t: s.t, dt: h });
                }
            }
        }
    }
    Ok(Trajectory { samples, meta })
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
        SystemSpec::from_sources(
            &[&["1"]],
            "0.5*k*q1^2",
            DissipationSpec::homogeneous(vec![DissipationTerm::parse("c*v1^2", 2.0).unwrap()]),
            params(&[("k", 1.0), ("c", c)]),
        )
        .unwrap()
    }

    #[test]
    fn free_particle_is_exact() {
        let sys = SystemSpec::from_sources(&[&["1"]], "0", DissipationSpec::none(), Params::new()).unwrap();
        let s = step_rk4(&sys, &State::new(0.0, vec![0.25], vec![1.0]), 0.5).unwrap();
        assert_eq!(s.q, vec![0.75]);
        assert_eq!(s.v, vec![1.0]);
        assert_eq!(s.t, 0.5);
    }

    #[test]
    fn rk4_full_period() {
        // oracle: the exact flow of the oscillator is a rotation with period 2 pi
        let sys = oscillator(0.0);
        let period = 2.0 * std::f64::consts::PI;
        let dt = period / 1000.0;
        let mut s = State::new(0.0, vec![1.0], vec![0.0]);
        for _ in 0..1000 {
            s = step_rk4(&sys, &s, dt).unwrap();
        }
        let err = ((s.q[0] - 1.0).powi(2) + s.v[0].powi(2)).sqrt();
        assert!(err <= 1e-9, "{err}");
    }

    #[test]
    fn invalid_steps() {
        let sys = oscillator(0.0);
        let s = State::new(0.0, vec![1.0], vec![0.0]);
        assert!(matches!(step_rk4(&sys, &s, -1.0), Err(DynamicsError::InvalidStep(_))));
        assert!(matches!(step_rk45(&sys, &s, 0.0, &IntegratorConfig::default()), Err(DynamicsError::InvalidStep(_))));
        let nan = State::new(0.0, vec![f64::NAN], vec![0.0]);
        assert!(matches!(step_rk4(&sys, &nan, 0.1), Err(DynamicsError::Divergence { .. })));
        assert!(matches!(
            step_rk45(&sys, &nan, 0.1, &IntegratorConfig::default()),
            Err(DynamicsError::Divergence { .. })
        ));
    }

    #[test]
    fn controller_contract() {
        let (accepted, next) = step_control(1.0, 0.1);
        assert!(accepted);
        assert!((next - 0.09).abs() < 1e-15);
        let (accepted, next) = step_control(1.0 + 1e-12, 0.1);
        assert!(!accepted && next < 0.1);
        assert_eq!(step_control(0.0, 0.1).1, 0.5);
        assert_eq!(step_control(1e-12, 0.1).1, 0.5);
        assert_eq!(step_control(1e12, 0.1).1, 0.1 * 0.2);
    }

    #[test]
    fn loose_tolerance_run_accepts_and_grows() {
        // reference run: at rel_tol 1e-3 from a small initial step the
        // controller only ever accepts, and grows dt until the step size
        // settles near its accuracy limit
        let sys = oscillator(0.2);
        let cfg = IntegratorConfig { dt: 1e-4, abs_tol: 1e-3, ..IntegratorConfig::rk45(1e-3) };
        let mut s = State::new(0.0, vec![1.0], vec![0.0]);
        let mut h = cfg.dt;
        let mut dts = vec![];
        while s.t < 5.0 {
            let step = step_rk45(&sys, &s, h, &cfg).unwrap();
            assert!(step.accepted, "rejected at t = {}", s.t);
            s = step.state;
            dts.push(h);
            h = step.dt_next;
        }
        let growth: Vec<_> = dts.iter().take_while(|&&d| d < 0.1).collect();
        assert!(growth.len() >= 4);
        assert!(growth.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn integrate_lands_on_t_end() {
        let sys = oscillator(0.2);
        let init = State::new(0.0, vec![1.0], vec![0.0]);
        let traj = integrate(&sys, &init, 1.0005, &IntegratorConfig::rk4(1e-3)).unwrap();
        assert_eq!(traj.last().state.t, 1.0005);
        assert_eq!(traj.first().state, init);
        assert!(traj.times().windows(2).all(|w| w[1] > w[0]));
        assert_eq!(traj.len(), 1002);

        let traj = integrate(&sys, &init, 2.0, &IntegratorConfig::rk45(1e-8)).unwrap();
        assert_eq!(traj.last().state.t, 2.0);
        assert!(traj.times().windows(2).all(|w| w[1] > w[0]));

        let cfg = IntegratorConfig { sample_every: 7, ..IntegratorConfig::rk4(0.01) };
        let traj = integrate(&sys, &init, 1.0, &cfg).unwrap();
        assert_eq!(traj.len(), 1 + 100 / 7 + 1);
        assert_eq!(traj.last().state.t, 1.0);
    }

    #[test]
    fn integrate_rejects_bad_requests() {
        let sys = oscillator(0.2);
        let init = State::new(1.0, vec![1.0], vec![0.0]);
        assert!(matches!(
            integrate(&sys, &init, 1.0, &IntegratorConfig::default()),
            Err(DynamicsError::InvalidConfig(_))
        ));
        let short = State::new(0.0, vec![1.0, 2.0], vec![0.0]);
        assert!(integrate(&sys, &short, 1.0, &IntegratorConfig::default()).is_err());
        let cfg = IntegratorConfig { max_steps: 10, ..IntegratorConfig::rk45(1e-12) };
        assert!(matches!(
            integrate(&sys, &State::new(0.0, vec![1.0], vec![0.0]), 100.0, &cfg),
            Err(DynamicsError::MaxSteps { .. })
        ));
    }

    #[test]
    fn diagnostics_identities() {
        let sys = oscillator(0.2);
        let (d, f) = diagnostics(&sys, &State::new(0.0, vec![0.5], vec![2.0])).unwrap();
        assert_eq!(d.total_energy, d.kinetic + d.potential);
        assert_eq!(d.lagrangian, d.kinetic - d.potential);
        assert!((d.kinetic - 2.0).abs() < 1e-15);
        assert!((d.potential - 0.125).abs() < 1e-15);
        assert!((d.dissipation - 0.8).abs() < 1e-15);
        assert!((d.dissipation_potential - 0.4).abs() < 1e-15);
        // on the equations of motion W = v . dR/dv = D
        assert!((d.power - 0.8).abs() < 1e-14);
        assert!((f.generalized[0] - 0.4).abs() < 1e-14);
    }
}
