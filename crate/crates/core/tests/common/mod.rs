#![allow(dead_code)]

use rayleigh::expr::Params;

/// Expression corpus over two degrees of freedom, flagged when it contains
/// an `abs`/`sign` kink.
pub const CORPUS: &[(&str, bool)] = &[
    ("2*q1 + v1^2", false),
    ("c*abs(v1)^3", true),
    ("0.5*k*q1^2", false),
    ("sqrt(v1^2+v2^2)", false),
    ("A*(v1^2+v2^2)^1.5", false),
    ("c*v1^2", false),
    ("q1*q2", false),
    ("5", false),
    ("sin(q1)*cos(q2) + exp(-q1^2)*v1", false),
    ("ln(1 + q1^2)*v2^2", false),
    ("tanh(q2)*v1*v2", false),
    ("(m1+m2)*l1^2 + m2*l1*l2*cos(q1-q2)*v1*v2", false),
    ("-(m1+m2)*g*l1*cos(q1) - m2*g*l2*cos(q2)", false),
    ("mu*abs(v1)", true),
    ("sign(v2)*v2^2", true),
    ("pow(q1^2 + 1, 0.5)*v1^4", false),
    ("(1 + q2^2)*(v1^2 + v2^2)^1.25", false),
    ("v1^3/(2 + cos(q1))", false),
    ("exp(q1/4)*abs(v1 - v2)^2.5", true),
    ("-q1^2/(1 + v2^2) - 3/(2 + sin(q2*v1))", false),
];

pub fn corpus_params() -> Params {
    [("c", 0.7), ("k", 2.0), ("A", 0.5), ("m1", 1.0), ("m2", 1.5), ("l1", 1.0), ("l2", 0.8), ("g", 9.81), ("mu", 0.05)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
}

pub fn params(pairs: &[(&str, f64)]) -> Params {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// Closed-form underdamped oscillator `q'' + c q' + q = 0` from `q(0) = 1`,
/// `q'(0) = 0`.
pub fn damped_q(c: f64, t: f64) -> f64 {
    let g = c / 2.0;
    let wd = (1.0 - g * g).sqrt();
    (-g * t).exp() * ((wd * t).cos() + g / wd * (wd * t).sin())
}
