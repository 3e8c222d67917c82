use serde::{Deserialize, Serialize};

/// Configuration-space state at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub t: f64,
    pub q: Vec<f64>,
    pub v: Vec<f64>,
}

impl State {
    pub fn new(t: f64, q: Vec<f64>, v: Vec<f64>) -> Self {
        State { t, q, v }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.q.iter().chain(&self.v).all(|x| x.is_finite())
    }
}

/// Decomposition of the generalized forces at a state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceBreakdown {
    /// `Q = -dV/dq`.
    pub conservative: Vec<f64>,
    /// `dT/dq - d/dt(dT/dv)`.
    pub inertial: Vec<f64>,
    /// `-dR/dv`.
    pub dissipative: Vec<f64>,
    /// `conservative + inertial`; equals `dR/dv` on a true motion.
    pub generalized: Vec<f64>,
}

/// Scalar quantities recorded at each retained sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    #[serde(rename = "H")]
    pub total_energy: f64,
    #[serde(rename = "T")]
    pub kinetic: f64,
    #[serde(rename = "V")]
    pub potential: f64,
    #[serde(rename = "D")]
    pub dissipation: f64,
    #[serde(rename = "R")]
    pub dissipation_potential: f64,
    /// Total mechanical power `v . F`.
    #[serde(rename = "W")]
    pub power: f64,
    #[serde(rename = "L")]
    pub lagrangian: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub state: State,
    pub diagnostics: Diagnostics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forces: Option<ForceBreakdown>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rk4,
    Rk45,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub method: Method,
    /// Fixed step for rk4; initial step for rk45.
    pub dt: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    /// Keep every n-th step (the final state is always kept).
    pub sample_every: usize,
    pub record_forces: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            method: Method::Rk4,
            dt: 1e-3,
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_steps: 10_000_000,
            sample_every: 1,
            record_forces: false,
        }
    }
}

impl IntegratorConfig {
    pub fn rk4(dt: f64) -> Self {
        IntegratorConfig { method: Method::Rk4, dt, ..Default::default() }
    }

    pub fn rk45(rel_tol: f64) -> Self {
        IntegratorConfig { method: Method::Rk45, rel_tol, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !positive(self.dt) {
            return Err(format!("dt must be positive, got {}", self.dt));
        }
        if !positive(self.rel_tol) || !positive(self.abs_tol) {
            return Err("rel_tol and abs_tol must be positive".into());
        }
        if self.max_steps == 0 || self.sample_every == 0 {
            return Err("max_steps and sample_every must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorMeta {
    pub method: Method,
    pub steps_taken: usize,
    pub steps_rejected: usize,
    pub dt: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub sample_every: usize,
}

/// Retained samples of an integration, strictly increasing in `t`; the
/// first sample is the initial condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub meta: IntegratorMeta,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.state.t).collect()
    }

    pub fn first(&self) -> &Sample {
        &self.samples[0]
    }

    pub fn last(&self) -> &Sample {
        &self.samples[self.samples.len() - 1]
    }

    /// Maximum `|H(t_k) - H(t_0)|`.
    pub fn energy_drift(&self) -> f64 {
        let h0 = self.first().diagnostics.total_energy;
        self.samples.iter().map(|s| (s.diagnostics.total_energy - h0).abs()).fold(0.0, f64::max)
    }
}
