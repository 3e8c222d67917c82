use serde::Serialize;

use super::quadrature::{GaussLegendre, QuadratureConfig};
use super::sampling::StateSampler;
use super::{Field, ModelError};
use crate::expr::{eval, eval_scalar, value_and_grad, Dual, EvalContext, EvalOptions, Expr, Params, Wrt};

/// One velocity-homogeneous contribution `D_n` to the dissipation function.
#[derive(Debug, Clone, PartialEq)]
pub struct DissipationTerm {
    pub field: Field,
    /// Declared homogeneity degree `n > 0`.
    pub degree: f64,
    /// Optional width for replacing `sign(x)` by `tanh(x/eps)` in force
    /// evaluation of `abs` kinks.
    pub smooth_eps: Option<f64>,
}

impl DissipationTerm {
    pub fn new(field: Field, degree: f64) -> Self {
        DissipationTerm { field, degree, smooth_eps: None }
    }

    pub fn parse(source: &str, degree: f64) -> Result<Self, ModelError> {
        Ok(Self::new(Field::parse("dissipation term", source)?, degree))
    }

    pub fn with_smoothing(mut self, eps: f64) -> Self {
        self.smooth_eps = Some(eps);
        self
    }

    pub fn expr(&self) -> &Expr {
        self.field.expr()
    }

    fn options(&self, smoothing: Smoothing) -> EvalOptions {
        match smoothing {
            Smoothing::Exact => EvalOptions::default(),
            Smoothing::Regularized => EvalOptions { kink_eps: self.smooth_eps },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneralDissipation {
    raw: Field,
    config: QuadratureConfig,
    rule: GaussLegendre,
}

impl GeneralDissipation {
    pub fn raw(&self) -> &Field {
        &self.raw
    }

    pub fn config(&self) -> &QuadratureConfig {
        &self.config
    }
}

/// The dissipation function `D(q, v)`, either as a sum of declared-degree
/// homogeneous terms or as a single general expression.
#[derive(Debug, Clone, PartialEq)]
pub enum DissipationSpec {
    HomogeneousSum(Vec<DissipationTerm>),
    General(GeneralDissipation),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstructionMode {
    /// `R = sum D_n / n`.
    ClosedForm,
    /// `R = int_0^1 D(q, u v) / u du`.
    Quadrature,
}

/// Whether kink regularization is applied to dissipative force evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoothing {
    Exact,
    Regularized,
}

/// Result of the `u`-integral together with its refinement evidence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadratureOutcome {
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gradient: Option<Vec<f64>>,
    /// Panel count of the returned estimate.
    pub panels: usize,
    /// Change between the last two refinement levels.
    pub change: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Per-term evaluation used by reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TermValue {
    pub expr: String,
    pub degree: f64,
    pub d: f64,
    pub contribution: f64,
}

impl DissipationSpec {
    pub fn none() -> Self {
        DissipationSpec::HomogeneousSum(Vec::new())
    }

    pub fn homogeneous(terms: Vec<DissipationTerm>) -> Self {
        DissipationSpec::HomogeneousSum(terms)
    }

    pub fn general(raw: Field, config: QuadratureConfig) -> Result<Self, ModelError> {
        config.validate().map_err(ModelError::Invalid)?;
        let rule = GaussLegendre::new(config.node_count);
        Ok(DissipationSpec::General(GeneralDissipation { raw, config, rule }))
    }

    pub fn mode(&self) -> ConstructionMode {
        match self {
            DissipationSpec::HomogeneousSum(_) => ConstructionMode::ClosedForm,
            DissipationSpec::General(_) => ConstructionMode::Quadrature,
        }
    }

    pub fn terms(&self) -> &[DissipationTerm] {
        match self {
            DissipationSpec::HomogeneousSum(t) => t,
            DissipationSpec::General(_) => &[],
        }
    }

    /// No dissipation terms declared.
    pub fn is_empty(&self) -> bool {
        matches!(self, DissipationSpec::HomogeneousSum(t) if t.is_empty())
    }

    fn exprs(&self) -> Vec<&Expr> {
        match self {
            DissipationSpec::HomogeneousSum(t) => t.iter().map(|t| t.expr()).collect(),
            DissipationSpec::General(g) => vec![g.raw.expr()],
        }
    }

    pub fn has_kink(&self) -> bool {
        self.exprs().iter().any(|e| e.has_kink())
    }

    pub fn has_fractional_power(&self) -> bool {
        self.exprs().iter().any(|e| e.has_fractional_power())
    }

    pub fn max_smooth_eps(&self) -> f64 {
        self.terms().iter().filter_map(|t| t.smooth_eps).fold(0.0, f64::max)
    }

    /// `D` as a single expression.
    pub fn summed_field(&self) -> Field {
        match self {
            DissipationSpec::HomogeneousSum(t) => Field::from_expr(Expr::sum(t.iter().map(|t| t.expr().clone()))),
            DissipationSpec::General(g) => g.raw.clone(),
        }
    }

    /// The same `D` in general (quadrature) mode.
    pub fn to_general(&self, config: QuadratureConfig) -> Result<Self, ModelError> {
        Self::general(self.summed_field(), config)
    }

    pub fn potential(&self) -> PotentialR<'_> {
        PotentialR { spec: self }
    }

    /// Checks bindings, degree signs and `D(q, 0) = 0` on sampled coordinates.
    pub fn validate(&self, dof: usize, params: &Params, samples: usize, seed: u64) -> Result<(), ModelError> {
        self.bind(dof, params)?;
        self.check_vanishes_at_rest(dof, params, samples, seed)
    }

    /// Checks bindings, degree signs and smoothing widths.
    pub fn bind(&self, dof: usize, params: &Params) -> Result<(), ModelError> {
        for (i, term) in self.terms().iter().enumerate() {
            term.field.bind(&format!("dissipation.terms[{i}].expr"), dof, params)?;
            if !(term.degree > 0.0 && term.degree.is_finite()) {
                return Err(ModelError::Hypothesis(format!(
                    "dissipation.terms[{i}]: degree must be positive (got {}); a degree-0 part makes the \
                     dissipation potential integral diverge",
                    term.degree
                )));
            }
            if let Some(eps) = term.smooth_eps {
                if !(eps > 0.0 && eps.is_finite()) {
                    return Err(ModelError::Invalid(format!(
                        "dissipation.terms[{i}].smooth_eps must be positive, got {eps}"
                    )));
                }
            }
        }
        if let DissipationSpec::General(g) = self {
            g.raw.bind("dissipation.raw", dof, params)?;
        }
        Ok(())
    }

    pub fn check_vanishes_at_rest(
        &self,
        dof: usize,
        params: &Params,
        samples: usize,
        seed: u64,
    ) -> Result<(), ModelError> {
        let zeros = vec![0.0; dof];
        let mut sampler = StateSampler::new(dof, seed);
        for _ in 0..samples.max(1) {
            let q = sampler.coords();
            let d = self.eval_d(&EvalContext::new(&q, &zeros, params))?;
            if d.abs() > 1e-12 {
                return Err(ModelError::Hypothesis(format!(
                    "dissipation must vanish at rest, but D(q, 0) = {d} at q = {q:?}; the dissipation \
                     potential integral diverges"
                )));
            }
        }
        Ok(())
    }

    pub fn eval_d(&self, ctx: &EvalContext) -> Result<f64, ModelError> {
        match self {
            DissipationSpec::HomogeneousSum(terms) => {
                terms.iter().map(|t| eval(t.expr(), ctx).map_err(ModelError::from)).sum()
            }
            DissipationSpec::General(g) => Ok(eval(g.raw.expr(), ctx)?),
        }
    }

    pub fn term_values(&self, ctx: &EvalContext) -> Result<Vec<TermValue>, ModelError> {
        self.terms()
            .iter()
            .map(|t| {
                let d = eval(t.expr(), ctx)?;
                Ok(TermValue { expr: t.field.source().to_string(), degree: t.degree, d, contribution: d / t.degree })
            })
            .collect()
    }

    /// `R = sum_n D_n / n`.
    pub fn eval_r_closed(&self, ctx: &EvalContext) -> Result<f64, ModelError> {
        let DissipationSpec::HomogeneousSum(terms) = self else {
            return Err(ModelError::ModeMismatch { expected: "homogeneous_sum" });
        };
        terms.iter().map(|t| Ok(eval(t.expr(), ctx)? / t.degree)).sum()
    }

    /// `R = int_0^1 D(q, u v) / u du` by composite Gauss–Legendre with panel
    /// doubling.
    pub fn eval_r_quadrature(&self, ctx: &EvalContext) -> Result<QuadratureOutcome, ModelError> {
        self.quadrature(ctx, false)
    }

    fn quadrature(&self, ctx: &EvalContext, with_gradient: bool) -> Result<QuadratureOutcome, ModelError> {
        let DissipationSpec::General(g) = self else {
            return Err(ModelError::ModeMismatch { expected: "general" });
        };
        let n = ctx.dof();
        let q: Vec<Dual> = ctx.q.iter().map(|&x| Dual::constant(x)).collect();
        let integrate = |panels: usize| -> Result<Dual, ModelError> {
            g.rule.composite_unit(panels, |u| {
                let v: Vec<Dual> = ctx
                    .v
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| {
                        if with_gradient {
                            let mut d = Dual::variable(u * x, i, n);
                            d.tangent[i] = u;
                            d
                        } else {
                            Dual::constant(u * x)
                        }
                    })
                    .collect();
                let d = eval_scalar(g.raw.expr(), &q, &v, ctx.params, EvalOptions::default())?;
                Ok(Dual { value: d.value / u, tangent: d.tangent.iter().map(|t| t / u).collect() })
            })
        };
        let diff = |a: &Dual, b: &Dual| {
            let mut m = (a.value - b.value).abs();
            for i in 0..a.tangent.len().max(b.tangent.len()) {
                let ta = a.tangent.get(i).copied().unwrap_or(0.0);
                let tb = b.tangent.get(i).copied().unwrap_or(0.0);
                m = m.max((ta - tb).abs());
            }
            m
        };
        let magnitude = |a: &Dual| a.tangent.iter().fold(a.value.abs(), |m, t| m.max(t.abs())).max(1.0);
        let tol = g.config.tolerance;
        let p = g.config.panels;
        let coarse = integrate(p)?;
        let fine = integrate(2 * p)?;
        let change = diff(&coarse, &fine);
        let outcome = |d: Dual, panels: usize, change: f64, warning: Option<String>| QuadratureOutcome {
            value: d.value,
            gradient: with_gradient.then(|| d.gradient(n)),
            panels,
            change,
            warning,
        };
        if change <= tol * magnitude(&fine) {
            return Ok(outcome(fine, 2 * p, change, None));
        }
        let finest = integrate(4 * p)?;
        let change2 = diff(&fine, &finest);
        if change2 <= tol * magnitude(&finest) {
            let warning = format!(
                "refinement from {p} to {} panels changed the result by {change:e}; accepted after a second doubling",
                2 * p
            );
            return Ok(outcome(finest, 4 * p, change2, Some(warning)));
        }
        Err(ModelError::Accuracy { change: change2, panels: 4 * p, tolerance: tol })
    }

    /// `dR/dv` at the state.
    pub fn grad_r_v(&self, ctx: &EvalContext) -> Result<Vec<f64>, ModelError> {
        self.grad_r_v_with(ctx, Smoothing::Exact)
    }

    pub fn grad_r_v_with(&self, ctx: &EvalContext, smoothing: Smoothing) -> Result<Vec<f64>, ModelError> {
        match self {
            DissipationSpec::HomogeneousSum(terms) => {
                let mut g = vec![0.0; ctx.dof()];
                for t in terms {
                    let (_, gt) = value_and_grad(t.expr(), ctx, Wrt::Velocities, t.options(smoothing))?;
                    for (a, b) in g.iter_mut().zip(gt) {
                        *a += b / t.degree;
                    }
                }
                Ok(g)
            }
            DissipationSpec::General(_) => {
                let out = self.quadrature(ctx, true)?;
                Ok(out.gradient.unwrap_or_else(|| vec![0.0; ctx.dof()]))
            }
        }
    }
}

/// The dissipation potential `R(q, v)` built from a [`DissipationSpec`],
/// normalized so that `R(q, 0) = 0`.
#[derive(Debug, Clone, Copy)]
pub struct PotentialR<'a> {
    spec: &'a DissipationSpec,
}

impl<'a> PotentialR<'a> {
    pub fn spec(&self) -> &'a DissipationSpec {
        self.spec
    }

    pub fn mode(&self) -> ConstructionMode {
        self.spec.mode()
    }

    pub fn eval(&self, ctx: &EvalContext) -> Result<f64, ModelError> {
        match self.spec {
            DissipationSpec::HomogeneousSum(_) => self.spec.eval_r_closed(ctx),
            DissipationSpec::General(_) => Ok(self.spec.eval_r_quadrature(ctx)?.value),
        }
    }

    pub fn grad_v(&self, ctx: &EvalContext) -> Result<Vec<f64>, ModelError> {
        self.spec.grad_r_v(ctx)
    }

    /// Gradient used for forces: kink regularization applied where declared.
    pub fn force_gradient(&self, ctx: &EvalContext) -> Result<Vec<f64>, ModelError> {
        self.spec.grad_r_v_with(ctx, Smoothing::Regularized)
    }
}
