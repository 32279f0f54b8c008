//! Scalar expressions over `x`, `y`, `alpha`, `beta`.
//!
//! Boundary data, coefficients and source terms are written as text in problem
//! files and parsed into [`Expr`]. Symbolic [`Expr::diff`] exists for test oracles.

mod diff;
mod parse;

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use parse::parse;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("missing binding for variable `{0}`")]
    MissingBinding(Var),
    #[error("non-finite result {value} while evaluating `{expr}`")]
    NonFinite { value: f64, expr: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    X,
    Y,
    Alpha,
    Beta,
}

impl Var {
    pub const ALL: [Var; 4] = [Var::X, Var::Y, Var::Alpha, Var::Beta];

    pub fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::Y => "y",
            Var::Alpha => "alpha",
            Var::Beta => "beta",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    /// Natural log. Only produced by differentiating `u^v` with a variable exponent.
    Ln,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Ln => "ln",
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Sqrt => v.sqrt(),
            Func::Ln => v.ln(),
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
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => " + ",
            BinOp::Sub => " - ",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }

    fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinOp::Add => a + b,
            BinOp::Sub => a - b,
            BinOp::Mul => a * b,
            BinOp::Div => a / b,
            BinOp::Pow => a.powf(b),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Pi,
    Var(Var),
    Neg(Box<Expr>),
    Call(Func, Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

/// Values for the free variables of an expression.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Bindings {
    values: [Option<f64>; 4],
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn xy(x: f64, y: f64) -> Self {
        Self::new().with(Var::X, x).with(Var::Y, y)
    }

    pub fn with(mut self, var: Var, value: f64) -> Self {
        self.values[var.index()] = Some(value);
        self
    }

    pub fn set(&mut self, var: Var, value: f64) {
        self.values[var.index()] = Some(value);
    }

    pub fn get(&self, var: Var) -> Option<f64> {
        self.values[var.index()]
    }
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn var(v: Var) -> Expr {
        Expr::Var(v)
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn call(f: Func, a: Expr) -> Expr {
        Expr::Call(f, Box::new(a))
    }

    /// Evaluate with IEEE doubles. Any non-finite intermediate is an error.
    pub fn eval(&self, b: &Bindings) -> Result<f64, ExprError> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::Pi => std::f64::consts::PI,
            Expr::Var(var) => b.get(*var).ok_or(ExprError::MissingBinding(*var))?,
            Expr::Neg(a) => -a.eval(b)?,
            Expr::Call(f, a) => f.apply(a.eval(b)?),
            Expr::Bin(op, l, r) => op.apply(l.eval(b)?, r.eval(b)?),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ExprError::NonFinite {
                value: v,
                expr: self.to_string(),
            })
        }
    }

    /// Evaluate at `(x, y)` with no further bindings.
    pub fn eval_xy(&self, x: f64, y: f64) -> Result<f64, ExprError> {
        self.eval(&Bindings::xy(x, y))
    }

    /// Replace every bound variable by its value.
    pub fn substitute(&self, b: &Bindings) -> Expr {
        match self {
            Expr::Var(v) => match b.get(*v) {
                Some(val) => Expr::Num(val),
                None => self.clone(),
            },
            Expr::Num(_) | Expr::Pi => self.clone(),
            Expr::Neg(a) => Expr::Neg(Box::new(a.substitute(b))),
            Expr::Call(f, a) => Expr::call(*f, a.substitute(b)),
            Expr::Bin(op, l, r) => Expr::bin(*op, l.substitute(b), r.substitute(b)),
        }
    }

    pub fn depends_on(&self, var: Var) -> bool {
        match self {
            Expr::Var(v) => *v == var,
            Expr::Num(_) | Expr::Pi => false,
            Expr::Neg(a) | Expr::Call(_, a) => a.depends_on(var),
            Expr::Bin(_, l, r) => l.depends_on(var) || r.depends_on(var),
        }
    }

    /// Free variables, sorted.
    pub fn free_vars(&self) -> Vec<Var> {
        Var::ALL
            .into_iter()
            .filter(|v| self.depends_on(*v))
            .collect()
    }

    /// Value if the expression has no free variables.
    pub fn as_constant(&self) -> Option<f64> {
        if self.free_vars().is_empty() {
            self.eval(&Bindings::new()).ok()
        } else {
            None
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Num(v) if *v == 0.0)
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Num(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => 3,
            Expr::Num(_) | Expr::Pi | Expr::Var(_) | Expr::Call(..) => 5,
            Expr::Neg(_) => 3,
            Expr::Bin(op, ..) => op.precedence(),
        }
    }
}

fn write_num(f: &mut fmt::Formatter<'_>, v: f64) -> fmt::Result {
    // Debug gives the shortest representation that round-trips.
    if v < 0.0 || (v == 0.0 && v.is_sign_negative()) {
        write!(f, "-{:?}", -v)
    } else {
        write!(f, "{v:?}")
    }
}

fn write_wrapped(f: &mut fmt::Formatter<'_>, e: &Expr, wrap: bool) -> fmt::Result {
    if wrap {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write_num(f, *v),
            Expr::Pi => f.write_str("pi"),
            Expr::Var(v) => f.write_str(v.name()),
            Expr::Neg(a) => {
                f.write_str("-")?;
                write_wrapped(f, a, a.precedence() < 3)
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Bin(op, l, r) => {
                let p = op.precedence();
                // Left-associative operators need parentheses on an equal-precedence
                // right operand; `^` is right-associative so the left side gets them.
                let (wrap_l, wrap_r) = if *op == BinOp::Pow {
                    (l.precedence() <= p, r.precedence() < p)
                } else {
                    (l.precedence() < p, r.precedence() <= p)
                };
                write_wrapped(f, l, wrap_l)?;
                f.write_str(op.symbol())?;
                write_wrapped(f, r, wrap_r)
            }
        }
    }
}

impl std::str::FromStr for Expr {
    type Err = ExprError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        parse(&text).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, b: Bindings) -> f64 {
        parse(s).unwrap().eval(&b).unwrap()
    }

    #[test]
    fn right_associative_power() {
        assert_eq!(ev("2^3^2", Bindings::new()), 512.0);
    }

    #[test]
    fn unary_minus_binds_looser_than_power() {
        assert_eq!(ev("-2^2", Bindings::new()), -4.0);
        assert_eq!(ev("2^-1", Bindings::new()), 0.5);
        assert_eq!(ev("--3", Bindings::new()), 3.0);
    }

    #[test]
    fn basic_values() {
        assert_eq!(ev("0", Bindings::new()), 0.0);
        assert_eq!(
            ev("sin(alpha*x)", Bindings::new().with(Var::X, 0.0).with(Var::Alpha, 5.0)),
            0.0
        );
        assert_eq!(ev("pi", Bindings::new()), std::f64::consts::PI);
        assert_eq!(ev("1 - 2 - 3", Bindings::new()), -4.0);
        assert_eq!(ev("8/4/2", Bindings::new()), 1.0);
        assert_eq!(ev("1e-3*2E2", Bindings::new()), 0.2);
    }

    #[test]
    fn eval_errors() {
        let e = parse("x + 1").unwrap();
        assert_eq!(
            e.eval(&Bindings::new()),
            Err(ExprError::MissingBinding(Var::X))
        );
        assert!(matches!(
            parse("1/0").unwrap().eval(&Bindings::new()),
            Err(ExprError::NonFinite { .. })
        ));
        assert!(matches!(
            parse("0^(-1)").unwrap().eval(&Bindings::new()),
            Err(ExprError::NonFinite { .. })
        ));
    }

    #[test]
    fn substitute_binds_parameters() {
        let e = parse("sin(alpha*x)").unwrap();
        let s = e.substitute(&Bindings::new().with(Var::Alpha, 2.0));
        assert_eq!(s.free_vars(), vec![Var::X]);
        assert_eq!(s.eval_xy(0.25, 0.0).unwrap(), (0.5f64).sin());
    }

    #[test]
    fn print_round_trips_tricky_shapes() {
        let cases = [
            "1 - (2 - 3)",
            "(2^3)^2",
            "2^3^2",
            "-(x + y)",
            "-x^2",
            "(-x)^2",
        ];
        for c in cases {
            let e = parse(c).unwrap();
            let back = parse(&e.to_string()).unwrap();
            assert_eq!(e, back, "{c} printed as {e}");
        }
        let neg = Expr::bin(BinOp::Pow, Expr::Num(-2.0), Expr::Num(2.0));
        let back = parse(&neg.to_string()).unwrap();
        assert_eq!(back.eval(&Bindings::new()).unwrap(), 4.0);
    }

    #[test]
    fn serde_uses_text() {
        let e = parse("cos(beta*y)").unwrap();
        let json = serde_json::to_string(&e).unwrap();
        assert_eq!(json, "\"cos(beta*y)\"");
        let back: Expr = serde_json::from_str(&json).unwrap();
        assert_eq!(back, e);
    }
}
