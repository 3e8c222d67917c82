//! JSON run configuration: an inline system or a builtin reference, plus
//! initial state, integrator, audit tolerances and output settings.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::builtins::builtin;
use crate::audit::AuditTolerances;
use crate::dynamics::{IntegratorConfig, State};
use crate::expr::Params;
use crate::model::{
    homogeneity_check, DissipationSpec, DissipationTerm, Field, ModelError, QuadratureConfig, SystemSpec,
};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid JSON at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(
        "dissipation term {index} `{expr}` is not homogeneous of declared degree {degree}: \
         relative violation {violation:e} at lambda = {lambda}"
    )]
    Homogeneity { index: usize, expr: String, degree: f64, violation: f64, lambda: f64 },
}

impl ConfigError {
    fn schema(path: impl Into<String>, message: impl fmt::Display) -> Self {
        ConfigError::Schema { path: path.into(), message: message.to_string() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Jsonl,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Jsonl => "jsonl",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub format: Format,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_every: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    q: Vec<f64>,
    v: Vec<f64>,
    #[serde(default)]
    t0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTerm {
    expr: String,
    degree: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    smooth_eps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
enum RawDissipation {
    HomogeneousSum {
        terms: Vec<RawTerm>,
    },
    General {
        raw: String,
        #[serde(default)]
        quadrature: QuadratureConfig,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    system: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    overrides: Option<BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dof: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    params: Option<Params>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mass_matrix: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    potential: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dissipation: Option<RawDissipation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    initial: Option<RawInitial>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    integrator: Option<IntegratorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    audit: Option<AuditTolerances>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    output: Option<OutputConfig>,
}

/// A validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Builtin name or file stem, used for default output names.
    pub name: String,
    pub system: SystemSpec,
    pub initial: State,
    pub t_end: f64,
    pub integrator: IntegratorConfig,
    pub audit: AuditTolerances,
    pub output: OutputConfig,
}

const DEFAULT_T_END: f64 = 10.0;

fn build_dissipation(raw: Option<RawDissipation>) -> Result<DissipationSpec, ConfigError> {
    Ok(match raw {
        None => DissipationSpec::none(),
        Some(RawDissipation::HomogeneousSum { terms }) => {
            let terms = terms
                .into_iter()
                .enumerate()
                .map(|(i, t)| {
                    let field = Field::parse(&format!("dissipation.terms[{i}].expr"), &t.expr)?;
                    let mut term = DissipationTerm::new(field, t.degree);
                    term.smooth_eps = t.smooth_eps;
                    Ok(term)
                })
                .collect::<Result<Vec<_>, ModelError>>()?;
            DissipationSpec::homogeneous(terms)
        }
        Some(RawDissipation::General { raw, quadrature }) => {
            quadrature.validate().map_err(|m| ConfigError::schema("dissipation.quadrature", m))?;
            DissipationSpec::general(Field::parse("dissipation.raw", &raw)?, quadrature)?
        }
    })
}

fn build_inline(raw: &mut RawConfig) -> Result<SystemSpec, ConfigError> {
    let dof = raw.dof.ok_or_else(|| ConfigError::schema("dof", "missing field (or give `system`)"))?;
    let mass = raw.mass_matrix.take().ok_or_else(|| ConfigError::schema("mass_matrix", "missing field"))?;
    if mass.len() != dof {
        return Err(ConfigError::schema("mass_matrix", format!("expected {dof} rows, got {}", mass.len())));
    }
    let mut m = Vec::with_capacity(dof);
    for (i, row) in mass.iter().enumerate() {
        if row.len() != dof {
            return Err(ConfigError::schema(
                format!("mass_matrix[{i}]"),
                format!("expected {dof} entries, got {}", row.len()),
            ));
        }
        m.push(
            row.iter()
                .enumerate()
                .map(|(j, s)| Field::parse(&format!("mass_matrix[{i}][{j}]"), s))
                .collect::<Result<Vec<_>, _>>()?,
        );
    }
    let potential = Field::parse(
        "potential",
        raw.potential.as_deref().ok_or_else(|| ConfigError::schema("potential", "missing field"))?,
    )?;
    let dissipation = build_dissipation(raw.dissipation.take())?;
    let params = raw.params.take().unwrap_or_default();
    let mut sys = SystemSpec::new(dof, m, potential, dissipation, params)?;
    if let Some(labels) = raw.labels.take() {
        if labels.len() != dof {
            return Err(ConfigError::schema("labels", format!("expected {dof} labels, got {}", labels.len())));
        }
        sys = sys.with_labels(labels);
    }
    Ok(sys)
}

fn check_vector(path: &str, x: &[f64], dof: usize) -> Result<(), ConfigError> {
    if x.len() != dof {
        return Err(ConfigError::schema(path, format!("expected {dof} values (dof), got {}", x.len())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(ConfigError::schema(path, "values must be finite"));
    }
    Ok(())
}

/// Checks every declared degree and that `D` vanishes at rest.
pub fn validate_dissipation(sys: &SystemSpec, samples: usize, seed: u64) -> Result<(), ConfigError> {
    let spec = sys.dissipation();
    for (index, term) in spec.terms().iter().enumerate() {
        let report = homogeneity_check(term, sys.dof(), sys.params(), samples, seed)?;
        if !report.pass {
            let lambda = report.witness.as_ref().and_then(|w| w.lambda).unwrap_or(f64::NAN);
            return Err(ConfigError::Homogeneity {
                index,
                expr: term.field.source().to_string(),
                degree: term.degree,
                violation: report.max_violation,
                lambda,
            });
        }
    }
    spec.check_vanishes_at_rest(sys.dof(), sys.params(), samples, seed)?;
    Ok(())
}

impl RunConfig {
    pub fn from_json_str(text: &str, name: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let mut raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if inner.is_syntax() || inner.is_eof() {
                ConfigError::Syntax { line: inner.line(), column: inner.column(), message: inner.to_string() }
            } else {
                ConfigError::schema(path, inner)
            }
        })?;

        let (name, system, initial, t_end, integrator) = match raw.system.take() {
            Some(builtin_name) => {
                for (field, present) in [
                    ("dof", raw.dof.is_some()),
                    ("params", raw.params.is_some()),
                    ("mass_matrix", raw.mass_matrix.is_some()),
                    ("potential", raw.potential.is_some()),
                    ("dissipation", raw.dissipation.is_some()),
                    ("labels", raw.labels.is_some()),
                ] {
                    if present {
                        return Err(ConfigError::schema(field, "not allowed together with `system`; use `overrides`"));
                    }
                }
                let overrides = raw.overrides.take().unwrap_or_default();
                let b = builtin(&builtin_name, &Params::new()).map_err(|e| ConfigError::schema("system", e))?;
                let mut system = b.system;
                for (k, v) in &overrides {
                    system.set_param(k, *v).map_err(|e| ConfigError::schema(format!("overrides.{k}"), e))?;
                }
                (b.name.to_string(), system, b.initial, b.t_end, b.integrator)
            }
            None => {
                if raw.overrides.is_some() {
                    return Err(ConfigError::schema("overrides", "only allowed together with `system`"));
                }
                let system = build_inline(&mut raw)?;
                if raw.initial.is_none() {
                    return Err(ConfigError::schema("initial", "missing field"));
                }
                let zero = State::new(0.0, vec![0.0; system.dof()], vec![0.0; system.dof()]);
                (name.to_string(), system, zero, DEFAULT_T_END, IntegratorConfig::default())
            }
        };

        let dof = system.dof();
        let initial = match raw.initial.take() {
            Some(init) => {
                check_vector("initial.q", &init.q, dof)?;
                check_vector("initial.v", &init.v, dof)?;
                if !init.t0.is_finite() {
                    return Err(ConfigError::schema("initial.t0", "must be finite"));
                }
                State::new(init.t0, init.q, init.v)
            }
            None => initial,
        };
        let t_end = raw.t_end.unwrap_or(t_end);
        if !(t_end.is_finite() && t_end > initial.t) {
            return Err(ConfigError::schema("t_end", format!("must exceed t0 = {}, got {t_end}", initial.t)));
        }
        let output = raw.output.take().unwrap_or_default();
        let mut integrator = raw.integrator.take().unwrap_or(integrator);
        if let Some(n) = output.sample_every {
            integrator.sample_every = n;
        }
        integrator.validate().map_err(|m| ConfigError::schema("integrator", m))?;
        let audit = raw.audit.take().unwrap_or_default();
        audit.validate().map_err(|m| ConfigError::schema("audit", m))?;

        let cfg = RunConfig { name, system, initial, t_end, integrator, audit, output };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Re-checks the dissipation hypotheses, e.g. after parameter changes.
    pub fn validate(&self) -> Result<(), ConfigError> {
        validate_dissipation(&self.system, self.audit.check_samples, self.audit.seed)
    }

    /// Applies `name=value` parameter overrides and re-validates.
    pub fn apply_overrides(&mut self, overrides: &[(String, f64)]) -> Result<(), ConfigError> {
        for (k, v) in overrides {
            self.system.set_param(k, *v)?;
        }
        if !overrides.is_empty() {
            self.validate()?;
        }
        Ok(())
    }

    /// Inline JSON form; loading it gives back an equivalent configuration.
    pub fn to_json(&self) -> String {
        let sys = &self.system;
        let dissipation = match sys.dissipation() {
            DissipationSpec::HomogeneousSum(terms) if terms.is_empty() => None,
            DissipationSpec::HomogeneousSum(terms) => Some(RawDissipation::HomogeneousSum {
                terms: terms
                    .iter()
                    .map(|t| RawTerm { expr: t.field.source().to_string(), degree: t.degree, smooth_eps: t.smooth_eps })
                    .collect(),
            }),
            DissipationSpec::General(g) => {
                Some(RawDissipation::General { raw: g.raw().source().to_string(), quadrature: *g.config() })
            }
        };
        let raw = RawConfig {
            dof: Some(sys.dof()),
            params: Some(sys.params().clone()),
            mass_matrix: Some(
                sys.mass_matrix_fields().iter().map(|r| r.iter().map(|f| f.source().to_string()).collect()).collect(),
            ),
            potential: Some(sys.potential_field().source().to_string()),
            dissipation,
            labels: sys.labels().map(|l| l.to_vec()),
            initial: Some(RawInitial { q: self.initial.q.clone(), v: self.initial.v.clone(), t0: self.initial.t }),
            t_end: Some(self.t_end),
            integrator: Some(self.integrator.clone()),
            audit: Some(self.audit.clone()),
            output: Some(OutputConfig { sample_every: None, ..self.output.clone() }),
            ..Default::default()
        };
        serde_json::to_string_pretty(&raw).expect("configuration serializes")
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io { path: path.to_path_buf(), source: e })?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
    RunConfig::from_json_str(&text, name)
}
