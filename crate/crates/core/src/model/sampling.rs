use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Deterministic stream of pseudo-random states used by the static checks.
///
/// Coordinates are uniform in `[-2, 2]^m`; velocities have log-uniform norm
/// in `[0.1, 10]` and a uniformly distributed direction.
pub struct StateSampler {
    dof: usize,
    rng: ChaCha8Rng,
}

pub const Q_RANGE: f64 = 2.0;
pub const V_NORM_MIN: f64 = 0.1;
pub const V_NORM_MAX: f64 = 10.0;

impl StateSampler {
    pub fn new(dof: usize, seed: u64) -> Self {
        StateSampler { dof, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn coords(&mut self) -> Vec<f64> {
        (0..self.dof).map(|_| self.rng.random_range(-Q_RANGE..=Q_RANGE)).collect()
    }

    /// Uniform direction on the unit sphere.
    pub fn direction(&mut self) -> Vec<f64> {
        loop {
            let d: Vec<f64> = (0..self.dof).map(|_| self.rng.sample(StandardNormal)).collect();
            let n = norm(&d);
            if n > 1e-12 {
                return d.into_iter().map(|x| x / n).collect();
            }
        }
    }

    pub fn velocity(&mut self) -> Vec<f64> {
        let s: f64 = self.rng.random_range(V_NORM_MIN.ln()..=V_NORM_MAX.ln());
        let speed = s.exp();
        self.direction().into_iter().map(|x| x * speed).collect()
    }

    pub fn state(&mut self) -> (Vec<f64>, Vec<f64>) {
        let q = self.coords();
        let v = self.velocity();
        (q, v)
    }
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
