use std::collections::BTreeSet;
use std::fmt;

/// Built-in functions callable from expressions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Sign,
    Tanh,
    Pow,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "sign" => Func::Sign,
            "tanh" => Func::Tanh,
            "pow" => Func::Pow,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Sign => "sign",
            Func::Tanh => "tanh",
            Func::Pow => "pow",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Pow => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    pub fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

/// Abstract syntax tree of a scalar field over coordinates, velocities and
/// named parameters.
///
/// Coordinate and velocity indices are stored zero-based; the surface syntax
/// (`q1`, `v1`, ...) is one-based.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Coord(usize),
    Vel(usize),
    Param(String),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl Expr {
    pub fn constant(value: f64) -> Expr {
        Expr::Const(value)
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    /// Sum of a list of expressions; the empty sum is the constant zero.
    pub fn sum<I: IntoIterator<Item = Expr>>(terms: I) -> Expr {
        terms.into_iter().reduce(|acc, t| Expr::binary(BinOp::Add, acc, t)).unwrap_or(Expr::Const(0.0))
    }

    fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Neg(inner) => inner.visit(f),
            Expr::Binary(_, a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.visit(f)),
            _ => {}
        }
    }

    /// Largest one-based coordinate index referenced, or 0.
    pub fn max_coord_index(&self) -> usize {
        let mut m = 0;
        self.visit(&mut |e| {
            if let Expr::Coord(j) = e {
                m = m.max(j + 1);
            }
        });
        m
    }

    /// Largest one-based velocity index referenced, or 0.
    pub fn max_vel_index(&self) -> usize {
        let mut m = 0;
        self.visit(&mut |e| {
            if let Expr::Vel(j) = e {
                m = m.max(j + 1);
            }
        });
        m
    }

    pub fn references_velocity(&self) -> bool {
        self.max_vel_index() > 0
    }

    pub fn param_names(&self) -> BTreeSet<&str> {
        let mut names = BTreeSet::new();
        self.visit(&mut |e| {
            if let Expr::Param(name) = e {
                names.insert(name.as_str());
            }
        });
        names
    }

    /// True when the tree contains `abs` or `sign`, whose derivatives jump.
    pub fn has_kink(&self) -> bool {
        let mut found = false;
        self.visit(&mut |e| {
            if matches!(e, Expr::Call(Func::Abs | Func::Sign, _)) {
                found = true;
            }
        });
        found
    }

    /// True when the tree raises something to a power that is not a
    /// non-negative even integer constant.
    pub fn has_fractional_power(&self) -> bool {
        let mut found = false;
        self.visit(&mut |e| {
            let exponent = match e {
                Expr::Binary(BinOp::Pow, _, b) => Some(b.as_ref()),
                Expr::Call(Func::Pow, args) if args.len() == 2 => Some(&args[1]),
                _ => None,
            };
            if let Some(exp) = exponent {
                let even = matches!(exp, Expr::Const(c) if *c >= 0.0 && c.fract() == 0.0 && (c / 2.0).fract() == 0.0);
                if !even {
                    found = true;
                }
            }
        });
        found
    }

    pub fn node_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_| n += 1);
        n
    }
}

/// Fully parenthesized rendering; parsing the output yields the same tree
/// (negative constants come back as a negation of a positive constant).
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => {
                if c.is_sign_negative() {
                    write!(f, "(-{:?})", -c)
                } else {
                    write!(f, "{c:?}")
                }
            }
            Expr::Coord(j) => write!(f, "q{}", j + 1),
            Expr::Vel(j) => write!(f, "v{}", j + 1),
            Expr::Param(name) => f.write_str(name),
            Expr::Neg(inner) => write!(f, "(-{inner})"),
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}
