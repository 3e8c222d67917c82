//! Scalar-field expressions over coordinates `q1..qN`, velocities `v1..vN`
//! and named parameters, with forward-mode first derivatives.

mod ast;
mod dual;
mod eval;
mod parser;

pub use ast::{BinOp, Expr, Func};
pub use dual::{Dual, Scalar};
pub use eval::{
    eval, eval_scalar, fd_gradient, grad_q, grad_v, sign, value_and_grad, BindError, EvalContext, EvalError,
    EvalOptions, Params, Wrt,
};
pub use parser::{parse, ParseError, ParseErrorKind};
