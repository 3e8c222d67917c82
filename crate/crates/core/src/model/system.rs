use nalgebra::DMatrix;

use super::{DissipationSpec, ModelError};
use crate::expr::{eval, parse, BindError, EvalContext, Expr, Params};

/// A parsed expression that remembers its source text.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    source: String,
    expr: Expr,
}

impl Field {
    /// `what` names the field in error messages.
    pub fn parse(what: &str, source: &str) -> Result<Self, ModelError> {
        let expr = parse(source).map_err(|e| ModelError::Parse { field: what.to_string(), source: e })?;
        Ok(Field { source: source.to_string(), expr })
    }

    pub fn from_expr(expr: Expr) -> Self {
        Field { source: expr.to_string(), expr }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn bind(&self, what: &str, dof: usize, params: &Params) -> Result<(), ModelError> {
        self.expr.bind(dof, params).map_err(|e| ModelError::Bind { field: what.to_string(), source: e })
    }

    fn bind_configuration(&self, what: &str, dof: usize, params: &Params) -> Result<(), ModelError> {
        self.bind(what, dof, params)?;
        if self.expr.references_velocity() {
            return Err(ModelError::Bind {
                field: what.to_string(),
                source: BindError::VelocityInConfigurationField(self.source.clone()),
            });
        }
        Ok(())
    }
}

/// A discrete mechanical system: `T = v.M(q)v/2`, `V(q)` and `D(q, v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    dof: usize,
    mass_matrix: Vec<Vec<Field>>,
    potential: Field,
    dissipation: DissipationSpec,
    params: Params,
    labels: Option<Vec<String>>,
}

/// Relative asymmetry tolerated in an evaluated mass matrix.
pub const MASS_SYMMETRY_TOL: f64 = 1e-12;

impl SystemSpec {
    /// Builds and binds a system. Dissipation hypotheses (homogeneity,
    /// vanishing at rest) are checked separately by the caller.
    pub fn new(
        dof: usize,
        mass_matrix: Vec<Vec<Field>>,
        potential: Field,
        dissipation: DissipationSpec,
        params: Params,
    ) -> Result<Self, ModelError> {
        if dof == 0 {
            return Err(ModelError::Invalid("dof must be positive".into()));
        }
        if mass_matrix.len() != dof || mass_matrix.iter().any(|row| row.len() != dof) {
            return Err(ModelError::Invalid(format!("mass_matrix must be {dof}x{dof}")));
        }
        for (i, row) in mass_matrix.iter().enumerate() {
            for (j, m) in row.iter().enumerate() {
                m.bind_configuration(&format!("mass_matrix[{i}][{j}]"), dof, &params)?;
            }
        }
        potential.bind_configuration("potential", dof, &params)?;
        if let Some((name, _)) = params.iter().find(|(_, v)| !v.is_finite()) {
            return Err(ModelError::Invalid(format!("parameter `{name}` is not finite")));
        }
        let sys = SystemSpec { dof, mass_matrix, potential, dissipation, params, labels: None };
        sys.dissipation.bind(dof, &sys.params)?;
        Ok(sys)
    }

    /// Convenience constructor from source strings.
    pub fn from_sources(
        mass_matrix: &[&[&str]],
        potential: &str,
        dissipation: DissipationSpec,
        params: Params,
    ) -> Result<Self, ModelError> {
        let dof = mass_matrix.len();
        let m = mass_matrix
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .map(|(j, s)| Field::parse(&format!("mass_matrix[{i}][{j}]"), s))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(dof, m, Field::parse("potential", potential)?, dissipation, params)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        self.labels = Some(labels);
        self
    }

    pub fn dof(&self) -> usize {
        self.dof
    }

    pub fn mass_matrix_fields(&self) -> &[Vec<Field>] {
        &self.mass_matrix
    }

    pub fn potential_field(&self) -> &Field {
        &self.potential
    }

    pub fn dissipation(&self) -> &DissipationSpec {
        &self.dissipation
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Replaces an existing parameter value.
    pub fn set_param(&mut self, name: &str, value: f64) -> Result<(), ModelError> {
        match self.params.get_mut(name) {
            Some(slot) if value.is_finite() => {
                *slot = value;
                Ok(())
            }
            Some(_) => Err(ModelError::Invalid(format!("parameter `{name}` must be finite"))),
            None => Err(ModelError::Invalid(format!("unknown parameter `{name}`"))),
        }
    }

    pub fn ctx<'a>(&'a self, q: &'a [f64], v: &'a [f64]) -> EvalContext<'a> {
        EvalContext::new(q, v, &self.params)
    }

    /// Evaluated `M(q)`, checked for symmetry.
    pub fn mass_matrix_at(&self, q: &[f64]) -> Result<DMatrix<f64>, ModelError> {
        let zeros = vec![0.0; self.dof];
        let ctx = self.ctx(q, &zeros);
        let mut m = DMatrix::zeros(self.dof, self.dof);
        for (i, row) in self.mass_matrix.iter().enumerate() {
            for (j, f) in row.iter().enumerate() {
                m[(i, j)] = eval(f.expr(), &ctx)?;
            }
        }
        let scale = m.iter().fold(1.0f64, |a, x| a.max(x.abs()));
        for i in 0..self.dof {
            for j in 0..i {
                let diff = (m[(i, j)] - m[(j, i)]).abs();
                if diff > MASS_SYMMETRY_TOL * scale {
                    return Err(ModelError::Asymmetric { q: q.to_vec(), i, j, diff });
                }
            }
        }
        Ok(m)
    }

    pub fn kinetic_energy(&self, q: &[f64], v: &[f64]) -> Result<f64, ModelError> {
        let m = self.mass_matrix_at(q)?;
        Ok(0.5 * quad_form(&m, v))
    }

    pub fn potential_energy(&self, q: &[f64]) -> Result<f64, ModelError> {
        let zeros = vec![0.0; self.dof];
        Ok(eval(self.potential.expr(), &self.ctx(q, &zeros))?)
    }
}

pub(crate) fn quad_form(m: &DMatrix<f64>, v: &[f64]) -> f64 {
    let n = v.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += v[i] * m[(i, j)] * v[j];
        }
    }
    s
}
