mod common;

use common::params;
use proptest::prelude::*;
use rayleigh::cli::builtins::{builtin, BUILTIN_NAMES};
use rayleigh::expr::{fd_gradient, EvalContext, Params, Wrt};
use rayleigh::model::{
    euler_identity_check, homogeneity_check, positivity_scan, DissipationSpec, DissipationTerm, Field,
    QuadratureConfig, StateSampler,
};

fn homogeneous(terms: &[(&str, f64)]) -> DissipationSpec {
    DissipationSpec::homogeneous(terms.iter().map(|(s, n)| DissipationTerm::parse(s, *n).unwrap()).collect())
}

/// Specs that pass their homogeneity check, with the dof they live on.
fn catalog() -> Vec<(DissipationSpec, usize, Params)> {
    let p = params(&[("c", 0.3), ("A", 0.8), ("mu", 0.1), ("b", 2.0)]);
    vec![
        (homogeneous(&[("c*v1^2", 2.0)]), 1, p.clone()),
        (homogeneous(&[("A*abs(v1)^3", 3.0)]), 1, p.clone()),
        (homogeneous(&[("mu*abs(v1)", 1.0)]), 1, p.clone()),
        (homogeneous(&[("A*(v1^2+v2^2)^1.5", 3.0)]), 2, p.clone()),
        (homogeneous(&[("c*v1^2", 2.0), ("A*abs(v1)^3", 3.0), ("mu*abs(v1)", 1.0)]), 1, p.clone()),
        (homogeneous(&[("(1+q1^2)*(v1^2 + b*v1*v2 + 3*v2^2)", 2.0)]), 2, p.clone()),
        (homogeneous(&[("exp(q2)*(v1^2+v2^2)^1.25", 2.5)]), 2, p.clone()),
        (homogeneous(&[("A*q1^2*abs(v1)^3", 3.0), ("c*(v1^2+v2^2)", 2.0)]), 2, p),
    ]
}

#[test]
fn catalog_specs_are_homogeneous_and_nonnegative() {
    for (spec, dof, p) in catalog() {
        spec.validate(dof, &p, 100, 1).unwrap();
        for term in spec.terms() {
            assert!(homogeneity_check(term, dof, &p, 100, 1).unwrap().pass);
        }
        assert!(positivity_scan(&spec, dof, &p, 100, 1).unwrap().pass);
    }
}

#[test]
fn closed_form_and_quadrature_agree() {
    for (spec, dof, p) in catalog() {
        let general = spec.to_general(QuadratureConfig::default()).unwrap();
        let mut sampler = StateSampler::new(dof, 3);
        for _ in 0..100 {
            let (q, v) = sampler.state();
            let ctx = EvalContext::new(&q, &v, &p);
            let closed = spec.eval_r_closed(&ctx).unwrap();
            let quad = general.eval_r_quadrature(&ctx).unwrap();
            assert!((quad.value - closed).abs() <= 1e-8 * closed.abs(), "{closed} vs {quad:?}");
            let (g1, g2) = (spec.grad_r_v(&ctx).unwrap(), general.grad_r_v(&ctx).unwrap());
            for (a, b) in g1.iter().zip(&g2) {
                assert!((a - b).abs() <= 1e-8 * (1.0 + a.abs()));
            }
        }
    }
}

#[test]
fn euler_identity_holds_for_every_passing_spec() {
    for (spec, dof, p) in catalog() {
        let r = euler_identity_check(&spec, dof, &p, 100, 5).unwrap();
        assert!(r.pass && r.max_violation <= 1e-8, "{r:?}");
        let general = spec.to_general(QuadratureConfig::default()).unwrap();
        assert!(euler_identity_check(&general, dof, &p, 100, 5).unwrap().pass);
    }
}

#[test]
fn pure_degree_ratio() {
    for (spec, dof, p) in catalog() {
        let [term] = spec.terms() else { continue };
        let mut sampler = StateSampler::new(dof, 9);
        for _ in 0..100 {
            let (q, v) = sampler.state();
            let ctx = EvalContext::new(&q, &v, &p);
            let d = spec.eval_d(&ctx).unwrap();
            if d > 0.0 {
                let ratio = spec.eval_r_closed(&ctx).unwrap() / d;
                assert!((ratio * term.degree - 1.0).abs() <= 4.0 * f64::EPSILON);
            }
        }
    }
}

#[test]
fn gradient_matches_finite_differences_away_from_kinks() {
    for (spec, dof, p) in catalog() {
        let general = spec.to_general(QuadratureConfig::default()).unwrap();
        for s in [&spec, &general] {
            let r = |q: &[f64], v: &[f64]| s.potential().eval(&EvalContext::new(q, v, &p)).unwrap();
            let mut sampler = StateSampler::new(dof, 11);
            for _ in 0..50 {
                let (q, v) = sampler.state();
                if s.has_kink() && v.iter().any(|x| x.abs() <= 1e-3) {
                    continue;
                }
                let g = s.grad_r_v(&EvalContext::new(&q, &v, &p)).unwrap();
                for j in 0..dof {
                    let h = 1e-6;
                    let (mut vp, mut vm) = (v.clone(), v.clone());
                    vp[j] += h;
                    vm[j] -= h;
                    let fd = (r(&q, &vp) - r(&q, &vm)) / (2.0 * h);
                    assert!((g[j] - fd).abs() <= 1e-6 * (1.0 + g[j].abs()), "{} vs {fd}", g[j]);
                }
            }
        }
    }
}

#[test]
fn documented_examples() {
    let ctx_p = |p: &Params, q: &[f64], v: &[f64]| (p.clone(), q.to_vec(), v.to_vec());
    let one = params(&[("c", 1.0), ("A", 3.0)]);

    let (p, q, v) = ctx_p(&one, &[0.0], &[2.0]);
    assert_eq!(homogeneous(&[("c*v1^2", 2.0)]).eval_r_closed(&EvalContext::new(&q, &v, &p)).unwrap(), 2.0);
    let (p, q, v) = ctx_p(&one, &[0.0, 0.0], &[1.0, 0.0]);
    assert_eq!(homogeneous(&[("A*(v1^2+v2^2)^1.5", 3.0)]).eval_r_closed(&EvalContext::new(&q, &v, &p)).unwrap(), 1.0);
    assert_eq!(DissipationSpec::none().eval_r_closed(&EvalContext::new(&q, &v, &p)).unwrap(), 0.0);

    let general =
        |raw: &str| DissipationSpec::general(Field::parse("raw", raw).unwrap(), QuadratureConfig::default()).unwrap();
    let e = Params::new();
    let r = general("v1^2").eval_r_quadrature(&EvalContext::new(&[0.0], &[2.0], &e)).unwrap();
    assert!((r.value - 2.0).abs() < 1e-14 && r.warning.is_none());
    let r = general("abs(v1)^3").eval_r_quadrature(&EvalContext::new(&[0.0], &[1.0], &e)).unwrap();
    assert!((r.value - 1.0 / 3.0).abs() < 1e-14);
    let r = general("v1^2 + abs(v1)^3").eval_r_quadrature(&EvalContext::new(&[0.0], &[1.0], &e)).unwrap();
    let closed =
        homogeneous(&[("v1^2", 2.0), ("abs(v1)^3", 3.0)]).eval_r_closed(&EvalContext::new(&[0.0], &[1.0], &e)).unwrap();
    assert!((r.value - 5.0 / 6.0).abs() < 1e-14 && (closed - 5.0 / 6.0).abs() < 1e-15);

    let g = homogeneous(&[("c*v1^2", 2.0)]).grad_r_v(&EvalContext::new(&[0.0], &[3.0], &one)).unwrap();
    assert_eq!(g, vec![3.0]);
    let a1 = params(&[("A", 1.0)]);
    let cubic = homogeneous(&[("A*abs(v1)^3", 3.0)]);
    let g = cubic.grad_r_v(&EvalContext::new(&[0.0], &[-2.0], &a1)).unwrap();
    assert_eq!(g, vec![-4.0]);
    let r_field = Field::parse("R", "abs(v1)^3/3").unwrap();
    let fd = fd_gradient(r_field.expr(), &EvalContext::new(&[0.0], &[-2.0], &a1), Wrt::Velocities, 1e-6).unwrap();
    assert!((fd[0] + 4.0).abs() < 1e-8);
    assert_eq!(DissipationSpec::none().grad_r_v(&EvalContext::new(&[0.0], &[3.0], &one)).unwrap(), vec![0.0]);

    let wrong = DissipationTerm::parse("c*v1^2", 3.0).unwrap();
    let rep = homogeneity_check(&wrong, 1, &one, 10, 0).unwrap();
    assert!(!rep.pass);
    let at2 = rep.per_lambda.iter().find(|l| l.lambda == 2.0).unwrap();
    assert!((at2.max_relative - 0.5).abs() < 1e-12);

    let neg = homogeneous(&[("-v1^2", 2.0)]);
    let rep = positivity_scan(&neg, 1, &Params::new(), 20, 0).unwrap();
    assert!(!rep.pass && rep.min_value < 0.0);
    let q2 = homogeneous(&[("A*q1^2*abs(v1)^3", 3.0)]);
    assert!(positivity_scan(&q2, 1, &one, 100, 0).unwrap().pass);
    assert!(euler_identity_check(&DissipationSpec::none(), 2, &Params::new(), 10, 0).unwrap().pass);
}

#[test]
fn broken_hypotheses_are_rejected_with_their_name() {
    let spec = homogeneous(&[("1 + v1^2", 2.0)]);
    let err = spec.validate(1, &Params::new(), 10, 0).unwrap_err().to_string();
    assert!(err.contains("vanish at rest"), "{err}");
    let spec = homogeneous(&[("v1^2", 0.0)]);
    assert!(spec.validate(1, &Params::new(), 10, 0).unwrap_err().to_string().contains("degree"));
    let general =
        DissipationSpec::general(Field::parse("raw", "cos(q1)").unwrap(), QuadratureConfig::default()).unwrap();
    assert!(general.validate(1, &Params::new(), 10, 0).is_err());
}

#[test]
fn builtins_bind_and_vanish_at_rest() {
    for name in BUILTIN_NAMES {
        let b = builtin(name, &Params::new()).unwrap();
        b.system.dissipation().validate(b.system.dof(), b.system.params(), 100, 0).unwrap();
    }
}

proptest! {
    #[test]
    fn potential_vanishes_at_rest(idx in 0usize..8, q in prop::collection::vec(-2.0f64..2.0, 2)) {
        let (spec, dof, p) = catalog().swap_remove(idx);
        let zeros = vec![0.0; dof];
        let ctx = EvalContext::new(&q[..dof], &zeros, &p);
        prop_assert_eq!(spec.potential().eval(&ctx).unwrap(), 0.0);
        let general = spec.to_general(QuadratureConfig::default()).unwrap();
        prop_assert_eq!(general.eval_r_quadrature(&ctx).unwrap().value, 0.0);
    }

    #[test]
    fn homogeneity_scaling_of_r(idx in 0usize..8, seed in 0u64..1000, lambda in 0.1f64..5.0) {
        let (spec, dof, p) = catalog().swap_remove(idx);
        let (q, v) = StateSampler::new(dof, seed).state();
        let scaled: Vec<f64> = v.iter().map(|x| x * lambda).collect();
        for term in spec.terms() {
            let single = DissipationSpec::homogeneous(vec![term.clone()]);
            let r1 = single.eval_r_closed(&EvalContext::new(&q, &v, &p)).unwrap();
            let r2 = single.eval_r_closed(&EvalContext::new(&q, &scaled, &p)).unwrap();
            let expect = lambda.powf(term.degree) * r1;
            prop_assert!((r2 - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
        }
    }
}
