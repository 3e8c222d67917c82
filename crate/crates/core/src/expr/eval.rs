use std::collections::BTreeMap;

use super::ast::{BinOp, Expr, Func};
use super::dual::{Dual, Scalar};

/// Named parameter values.
pub type Params = BTreeMap<String, f64>;

/// Point at which an expression is evaluated.
#[derive(Debug, Clone, Copy)]
pub struct EvalContext<'a> {
    pub q: &'a [f64],
    pub v: &'a [f64],
    pub params: &'a Params,
}

impl<'a> EvalContext<'a> {
    pub fn new(q: &'a [f64], v: &'a [f64], params: &'a Params) -> Self {
        debug_assert_eq!(q.len(), v.len());
        EvalContext { q, v, params }
    }

    pub fn dof(&self) -> usize {
        self.q.len()
    }
}

/// Which block of variables to differentiate against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wrt {
    Coords,
    Velocities,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EvalOptions {
    /// When set, `d|x|/dx` is evaluated as `tanh(x/eps)` instead of
    /// `sign(x)`. Values are unaffected.
    pub kink_eps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BindError {
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("`{var}` out of range for a system with {dof} degree(s) of freedom")]
    IndexOutOfRange { var: String, dof: usize },
    #[error("`{0}` may only depend on coordinates but references a velocity")]
    VelocityInConfigurationField(String),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("domain error: {func} of {arg} in `{subexpr}`")]
    Domain { func: &'static str, arg: f64, subexpr: String },
    #[error("unbound parameter `{0}`")]
    UnboundParameter(String),
    #[error("variable `{0}` outside the evaluation context")]
    IndexOutOfRange(String),
    #[error("finite-difference step must be positive and finite, got {0}")]
    InvalidStep(f64),
}

impl Expr {
    /// Checks that every variable index fits in `dof` and every parameter
    /// resolves against `params`.
    pub fn bind(&self, dof: usize, params: &Params) -> Result<(), BindError> {
        if let Some(name) = self.param_names().into_iter().find(|n| !params.contains_key(*n)) {
            return Err(BindError::UnknownParameter(name.to_string()));
        }
        let qmax = self.max_coord_index();
        if qmax > dof {
            return Err(BindError::IndexOutOfRange { var: format!("q{qmax}"), dof });
        }
        let vmax = self.max_vel_index();
        if vmax > dof {
            return Err(BindError::IndexOutOfRange { var: format!("v{vmax}"), dof });
        }
        Ok(())
    }
}

fn domain(func: &'static str, arg: f64, node: &Expr) -> EvalError {
    EvalError::Domain { func, arg, subexpr: node.to_string() }
}

/// Evaluates `e` over an arbitrary scalar type. `q` and `v` may carry
/// derivative information.
pub fn eval_scalar<S: Scalar>(e: &Expr, q: &[S], v: &[S], params: &Params, opts: EvalOptions) -> Result<S, EvalError> {
    let rec = |x: &Expr| eval_scalar(x, q, v, params, opts);
    Ok(match e {
        Expr::Const(c) => S::from_f64(*c),
        Expr::Coord(j) => q.get(*j).cloned().ok_or_else(|| EvalError::IndexOutOfRange(format!("q{}", j + 1)))?,
        Expr::Vel(j) => v.get(*j).cloned().ok_or_else(|| EvalError::IndexOutOfRange(format!("v{}", j + 1)))?,
        Expr::Param(name) => S::from_f64(*params.get(name).ok_or_else(|| EvalError::UnboundParameter(name.clone()))?),
        Expr::Neg(inner) => {
            let x = rec(inner)?;
            x.chain(-x.value(), -1.0)
        }
        Expr::Binary(op, a, b) => {
            let (x, y) = (rec(a)?, rec(b)?);
            let (xv, yv) = (x.value(), y.value());
            match op {
                BinOp::Add => S::chain2(&x, &y, xv + yv, 1.0, 1.0),
                BinOp::Sub => S::chain2(&x, &y, xv - yv, 1.0, -1.0),
                BinOp::Mul => S::chain2(&x, &y, xv * yv, yv, xv),
                BinOp::Div => {
                    if yv == 0.0 {
                        return Err(domain("division", yv, e));
                    }
                    S::chain2(&x, &y, xv / yv, 1.0 / yv, -xv / (yv * yv))
                }
                BinOp::Pow => power(&x, &y, e)?,
            }
        }
        Expr::Call(func, args) => {
            if *func == Func::Pow {
                let (x, y) = (rec(&args[0])?, rec(&args[1])?);
                return power(&x, &y, e);
            }
            let x = rec(&args[0])?;
            let xv = x.value();
            match func {
                Func::Sin => x.chain(xv.sin(), xv.cos()),
                Func::Cos => x.chain(xv.cos(), -xv.sin()),
                Func::Exp => {
                    let ex = xv.exp();
                    x.chain(ex, ex)
                }
                Func::Ln => {
                    if xv <= 0.0 {
                        return Err(domain("ln", xv, e));
                    }
                    x.chain(xv.ln(), 1.0 / xv)
                }
                Func::Sqrt => {
                    if xv < 0.0 {
                        return Err(domain("sqrt", xv, e));
                    }
                    let s = xv.sqrt();
                    x.chain(s, 0.5 / s)
                }
                Func::Abs => {
                    let slope = match opts.kink_eps {
                        Some(eps) => (xv / eps).tanh(),
                        None => sign(xv),
                    };
                    x.chain(xv.abs(), slope)
                }
                Func::Sign => x.chain(sign(xv), 0.0),
                Func::Tanh => {
                    let t = xv.tanh();
                    x.chain(t, 1.0 - t * t)
                }
                Func::Pow => unreachable!(),
            }
        }
    })
}

/// `sign(0) = 0`.
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn integer_exponent(y: f64) -> Option<i32> {
    (y.fract() == 0.0 && y.abs() <= i32::MAX as f64).then_some(y as i32)
}

fn power<S: Scalar>(x: &S, y: &S, node: &Expr) -> Result<S, EvalError> {
    let (b, p) = (x.value(), y.value());
    let variable_exponent = !y.is_constant();
    if let Some(n) = integer_exponent(p) {
        if b == 0.0 && n < 0 {
            return Err(domain("pow", b, node));
        }
        if b < 0.0 && variable_exponent {
            return Err(domain("pow", b, node));
        }
        let value = b.powi(n);
        let db = if n == 0 { 0.0 } else { n as f64 * b.powi(n - 1) };
        let dp = if b > 0.0 { value * b.ln() } else { 0.0 };
        return Ok(S::chain2(x, y, value, db, dp));
    }
    if b > 0.0 {
        let value = b.powf(p);
        Ok(S::chain2(x, y, value, p * b.powf(p - 1.0), value * b.ln()))
    } else if b == 0.0 && p > 0.0 {
        Ok(S::chain2(x, y, 0.0, p * b.powf(p - 1.0), 0.0))
    } else {
        Err(domain("pow", b, node))
    }
}

/// Plain double-precision evaluation.
pub fn eval(e: &Expr, ctx: &EvalContext) -> Result<f64, EvalError> {
    eval_scalar(e, ctx.q, ctx.v, ctx.params, EvalOptions::default())
}

/// Value and exact gradient with respect to one block of variables, from a
/// single dual pass carrying `dof` tangent directions.
pub fn value_and_grad(e: &Expr, ctx: &EvalContext, wrt: Wrt, opts: EvalOptions) -> Result<(f64, Vec<f64>), EvalError> {
    let n = ctx.dof();
    let seeded = |xs: &[f64]| -> Vec<Dual> { xs.iter().enumerate().map(|(i, &x)| Dual::variable(x, i, n)).collect() };
    let plain = |xs: &[f64]| -> Vec<Dual> { xs.iter().map(|&x| Dual::constant(x)).collect() };
    let (q, v) = match wrt {
        Wrt::Coords => (seeded(ctx.q), plain(ctx.v)),
        Wrt::Velocities => (plain(ctx.q), seeded(ctx.v)),
    };
    let d = eval_scalar(e, &q, &v, ctx.params, opts)?;
    let g = d.gradient(n);
    Ok((d.value, g))
}

/// Exact gradient with respect to the velocities.
pub fn grad_v(e: &Expr, ctx: &EvalContext) -> Result<Vec<f64>, EvalError> {
    value_and_grad(e, ctx, Wrt::Velocities, EvalOptions::default()).map(|(_, g)| g)
}

/// Exact gradient with respect to the coordinates.
pub fn grad_q(e: &Expr, ctx: &EvalContext) -> Result<Vec<f64>, EvalError> {
    value_and_grad(e, ctx, Wrt::Coords, EvalOptions::default()).map(|(_, g)| g)
}

/// Central-difference gradient. Only used as an independent check on the
/// dual-number path.
pub fn fd_gradient(e: &Expr, ctx: &EvalContext, wrt: Wrt, step: f64) -> Result<Vec<f64>, EvalError> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(EvalError::InvalidStep(step));
    }
    let mut q = ctx.q.to_vec();
    let mut v = ctx.v.to_vec();
    (0..ctx.dof())
        .map(|i| {
            let at = |q: &[f64], v: &[f64]| eval(e, &EvalContext::new(q, v, ctx.params));
            let base = match wrt {
                Wrt::Coords => q[i],
                Wrt::Velocities => v[i],
            };
            let set = |q: &mut Vec<f64>, v: &mut Vec<f64>, x: f64| match wrt {
                Wrt::Coords => q[i] = x,
                Wrt::Velocities => v[i] = x,
            };
            set(&mut q, &mut v, base + step);
            let plus = at(&q, &v)?;
            set(&mut q, &mut v, base - step);
            let minus = at(&q, &v)?;
            set(&mut q, &mut v, base);
            Ok((plus - minus) / (2.0 * step))
        })
        .collect()
}
