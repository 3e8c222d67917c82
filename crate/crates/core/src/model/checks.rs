//! Numerical checks of the structural hypotheses on `D` and `R`.

use serde::Serialize;

use super::sampling::{dot, StateSampler};
use super::{DissipationSpec, DissipationTerm, ModelError};
use crate::expr::{eval, EvalContext, Params};

/// Scalings probed by [`homogeneity_check`].
pub const HOMOGENEITY_LAMBDAS: [f64; 3] = [0.5, 2.0, 3.0];
pub const HOMOGENEITY_TOL: f64 = 1e-9;
pub const EULER_TOL: f64 = 1e-8;
pub const POSITIVITY_FLOOR: f64 = -1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaViolation {
    pub lambda: f64,
    /// Largest `|e(q, lv) - l^n e(q, v)| / |l^n e(q, v)|` over the samples.
    pub max_relative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HomogeneityReport {
    pub expr: String,
    pub degree: f64,
    pub samples: usize,
    pub pass: bool,
    /// Largest violation measured against the pass tolerance, i.e.
    /// `|diff| / (1 + |l^n e|)`.
    pub max_violation: f64,
    pub per_lambda: Vec<LambdaViolation>,
    /// Largest `|e(q, 0)|` seen.
    pub rest_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EulerReport {
    pub samples: usize,
    pub pass: bool,
    /// Largest `|v.dR/dv - D| / (1 + |D|)`.
    pub max_violation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositivityReport {
    pub samples: usize,
    pub pass: bool,
    pub min_value: f64,
    pub witness: Witness,
}

fn require_samples(samples: usize) -> Result<(), ModelError> {
    if samples == 0 {
        return Err(ModelError::Invalid("at least one sample is required".into()));
    }
    Ok(())
}

/// Verifies `e(q, lv) = l^n e(q, v)` for `l` in {0.5, 2, 3} and
/// `e(q, 0) = 0` on seeded random states.
pub fn homogeneity_check(
    term: &DissipationTerm,
    dof: usize,
    params: &Params,
    samples: usize,
    seed: u64,
) -> Result<HomogeneityReport, ModelError> {
    require_samples(samples)?;
    let mut sampler = StateSampler::new(dof, seed);
    let mut per_lambda: Vec<LambdaViolation> =
        HOMOGENEITY_LAMBDAS.iter().map(|&lambda| LambdaViolation { lambda, max_relative: 0.0 }).collect();
    let mut max_violation = 0.0f64;
    let mut rest_value = 0.0f64;
    let mut witness = None;
    let zeros = vec![0.0; dof];
    for _ in 0..samples {
        let (q, v) = sampler.state();
        let base = eval(term.expr(), &EvalContext::new(&q, &v, params))?;
        rest_value = rest_value.max(eval(term.expr(), &EvalContext::new(&q, &zeros, params))?.abs());
        for slot in per_lambda.iter_mut() {
            let lambda = slot.lambda;
            let scaled_v: Vec<f64> = v.iter().map(|x| lambda * x).collect();
            let scaled = eval(term.expr(), &EvalContext::new(&q, &scaled_v, params))?;
            let expected = lambda.powf(term.degree) * base;
            let diff = (scaled - expected).abs();
            let relative = if expected != 0.0 { diff / expected.abs() } else { diff };
            slot.max_relative = slot.max_relative.max(relative);
            let violation = diff / (1.0 + expected.abs());
            if violation > max_violation {
                max_violation = violation;
                if violation > HOMOGENEITY_TOL {
                    witness = Some(Witness { q: q.clone(), v: v.clone(), lambda: Some(lambda) });
                }
            }
        }
    }
    let pass = max_violation <= HOMOGENEITY_TOL && rest_value <= 1e-12;
    if witness.is_none() && rest_value > 1e-12 {
        witness = Some(Witness { q: vec![], v: zeros, lambda: None });
    }
    Ok(HomogeneityReport {
        expr: term.field.source().to_string(),
        degree: term.degree,
        samples,
        pass,
        max_violation,
        per_lambda,
        rest_value,
        witness,
    })
}

/// Verifies `v.dR/dv = D` on seeded random states.
pub fn euler_identity_check(
    spec: &DissipationSpec,
    dof: usize,
    params: &Params,
    samples: usize,
    seed: u64,
) -> Result<EulerReport, ModelError> {
    require_samples(samples)?;
    let mut sampler = StateSampler::new(dof, seed);
    let mut max_violation = 0.0f64;
    let mut witness = None;
    for _ in 0..samples {
        let (q, v) = sampler.state();
        let ctx = EvalContext::new(&q, &v, params);
        let d = spec.eval_d(&ctx)?;
        let power = dot(&v, &spec.grad_r_v(&ctx)?);
        let violation = (power - d).abs() / (1.0 + d.abs());
        if violation > max_violation {
            max_violation = violation;
            if violation > EULER_TOL {
                witness = Some(Witness { q, v, lambda: None });
            }
        }
    }
    Ok(EulerReport { samples, pass: max_violation <= EULER_TOL, max_violation, witness })
}

/// Smallest sampled value of `D`.
pub fn positivity_scan(
    spec: &DissipationSpec,
    dof: usize,
    params: &Params,
    samples: usize,
    seed: u64,
) -> Result<PositivityReport, ModelError> {
    require_samples(samples)?;
    let mut sampler = StateSampler::new(dof, seed);
    let mut best: Option<(f64, Witness)> = None;
    for _ in 0..samples {
        let (q, v) = sampler.state();
        let d = spec.eval_d(&EvalContext::new(&q, &v, params))?;
        if best.as_ref().is_none_or(|(m, _)| d < *m) {
            best = Some((d, Witness { q, v, lambda: None }));
        }
    }
    let (min_value, witness) = best.expect("samples >= 1");
    Ok(PositivityReport { samples, pass: min_value >= POSITIVITY_FLOOR, min_value, witness })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Field, QuadratureConfig};

    fn params(pairs: &[(&str, f64)]) -> Params {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn term(src: &str, n: f64) -> DissipationTerm {
        DissipationTerm::parse(src, n).unwrap()
    }

    #[test]
    fn homogeneity_passes_for_declared_degrees() {
        let p = params(&[("c", 1.0), ("A", 1.0)]);
        assert!(homogeneity_check(&term("c*v1^2", 2.0), 1, &p, 50, 1).unwrap().pass);
        assert!(homogeneity_check(&term("A*(v1^2+v2^2)^1.5", 3.0), 2, &p, 50, 1).unwrap().pass);
        assert!(homogeneity_check(&term("(1+q1^2)*abs(v1)", 1.0), 1, &p, 50, 1).unwrap().pass);
        assert!(homogeneity_check(&term("abs(v1)^2.5", 2.5), 1, &p, 50, 1).unwrap().pass);
    }

    #[test]
    fn wrong_degree_reports_violation_per_scaling() {
        // oracle: |l^2 - l^3| / l^3 at l = 2 is 1/2, independent of the state
        let p = params(&[("c", 1.0)]);
        let r = homogeneity_check(&term("c*v1^2", 3.0), 1, &p, 20, 3).unwrap();
        assert!(!r.pass);
        let at2 = r.per_lambda.iter().find(|l| l.lambda == 2.0).unwrap();
        assert!((at2.max_relative - 0.5).abs() < 1e-12);
        let at3 = r.per_lambda.iter().find(|l| l.lambda == 3.0).unwrap();
        assert!((at3.max_relative - 2.0 / 3.0).abs() < 1e-12);
        assert!(r.witness.is_some());
    }

    #[test]
    fn nonzero_at_rest_fails_homogeneity() {
        let r = homogeneity_check(&term("1 + v1^2", 2.0), 1, &Params::new(), 10, 0).unwrap();
        assert!(!r.pass);
        assert_eq!(r.rest_value, 1.0);
    }

    #[test]
    fn zero_samples_is_an_error() {
        assert!(homogeneity_check(&term("v1^2", 2.0), 1, &Params::new(), 0, 0).is_err());
        assert!(positivity_scan(&DissipationSpec::none(), 1, &Params::new(), 0, 0).is_err());
    }

    #[test]
    fn euler_identity() {
        let p = params(&[("c", 0.3), ("A", 2.0)]);
        let quadratic = DissipationSpec::homogeneous(vec![term("c*v1^2", 2.0)]);
        assert!(euler_identity_check(&quadratic, 1, &p, 100, 5).unwrap().pass);
        let cubic = DissipationSpec::homogeneous(vec![term("A*(v1^2+v2^2)^1.5", 3.0)]);
        let r = euler_identity_check(&cubic, 2, &p, 100, 5).unwrap();
        assert!(r.pass, "{r:?}");
        let r = euler_identity_check(&DissipationSpec::none(), 1, &p, 10, 5).unwrap();
        assert!(r.pass);
        assert_eq!(r.max_violation, 0.0);
        let general = cubic.to_general(QuadratureConfig::default()).unwrap();
        assert!(euler_identity_check(&general, 2, &p, 100, 5).unwrap().pass);
    }

    #[test]
    fn euler_identity_detects_mis_declared_degree() {
        let wrong = DissipationSpec::homogeneous(vec![term("v1^2", 3.0)]);
        let r = euler_identity_check(&wrong, 1, &Params::new(), 20, 5).unwrap();
        assert!(!r.pass);
        assert!(r.witness.is_some());
    }

    #[test]
    fn positivity() {
        let p = params(&[("c", 1.0), ("A", 1.0)]);
        let ok = positivity_scan(&DissipationSpec::homogeneous(vec![term("c*v1^2", 2.0)]), 1, &p, 100, 9).unwrap();
        assert!(ok.pass && ok.min_value > 0.0);
        // the minimum sits at the smallest sampled speed
        assert!(ok.min_value >= 0.01 * (1.0 - 1e-12));
        let bad = positivity_scan(&DissipationSpec::homogeneous(vec![term("-v1^2", 2.0)]), 1, &p, 100, 9).unwrap();
        assert!(!bad.pass && bad.min_value < 0.0);
        assert!((bad.min_value + bad.witness.v[0].powi(2)).abs() < 1e-12);
        let coeff = DissipationSpec::homogeneous(vec![term("q1^2*(v1^2+v2^2)^1.5", 3.0)]);
        assert!(positivity_scan(&coeff, 2, &p, 100, 9).unwrap().pass);
        let raw =
            DissipationSpec::general(Field::parse("raw", "-abs(v1)").unwrap(), QuadratureConfig::default()).unwrap();
        assert!(!positivity_scan(&raw, 1, &p, 10, 9).unwrap().pass);
    }
}
