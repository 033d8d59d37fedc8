//! Per-sample loss expressions over the true value `y` and prediction `p`.
//!
//! Grammar (left-associative, `^` binds tighter than unary minus):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := ['-'] atom ['^' ['-'] number]
//! atom   := number | 'y' | 'p' | func '(' expr ')' | '(' expr ')'
//! func   := 'log' | 'exp' | 'abs'
//! ```
//!
//! Whenever `p` appears inside the argument of `log`, it is clamped to
//! `[1e-12, 1 - 1e-12]` first. `d|u|/dp` uses `sign(u)` with `sign(0) = 0`.

mod diff;
mod parser;

pub use diff::differentiate;
pub use parser::{parse_loss, ParseError, MAX_SOURCE_BYTES};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const P_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LossExpr {
    Const(f64),
    VarY,
    VarP,
    Add(Box<LossExpr>, Box<LossExpr>),
    Sub(Box<LossExpr>, Box<LossExpr>),
    Mul(Box<LossExpr>, Box<LossExpr>),
    Div(Box<LossExpr>, Box<LossExpr>),
    Neg(Box<LossExpr>),
    /// Exponent is always a constant.
    Pow(Box<LossExpr>, f64),
    Log(Box<LossExpr>),
    Exp(Box<LossExpr>),
    Abs(Box<LossExpr>),
    /// Only produced by differentiation of `abs`; not part of the surface
    /// grammar.
    Sign(Box<LossExpr>),
}

#[derive(Debug, Error, PartialEq)]
pub enum LossError {
    #[error("loss is not finite at y={y}, p={p}")]
    NonFinite { y: f64, p: f64 },
    #[error("loss gradient is not finite at y={y}, p={p}")]
    NonFiniteGradient { y: f64, p: f64 },
}

impl LossExpr {
    pub fn contains_p(&self) -> bool {
        match self {
            LossExpr::VarP => true,
            LossExpr::Const(_) | LossExpr::VarY => false,
            LossExpr::Add(a, b) | LossExpr::Sub(a, b) | LossExpr::Mul(a, b) | LossExpr::Div(a, b) => {
                a.contains_p() || b.contains_p()
            }
            LossExpr::Neg(a)
            | LossExpr::Pow(a, _)
            | LossExpr::Log(a)
            | LossExpr::Exp(a)
            | LossExpr::Abs(a)
            | LossExpr::Sign(a) => a.contains_p(),
        }
    }

    /// True if some `log` argument depends on `p`.
    pub fn logs_of_p(&self) -> bool {
        match self {
            LossExpr::Log(a) => a.contains_p() || a.logs_of_p(),
            LossExpr::Const(_) | LossExpr::VarY | LossExpr::VarP => false,
            LossExpr::Add(a, b) | LossExpr::Sub(a, b) | LossExpr::Mul(a, b) | LossExpr::Div(a, b) => {
                a.logs_of_p() || b.logs_of_p()
            }
            LossExpr::Neg(a) | LossExpr::Pow(a, _) | LossExpr::Exp(a) | LossExpr::Abs(a) | LossExpr::Sign(a) => {
                a.logs_of_p()
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            LossExpr::Const(_) | LossExpr::VarY | LossExpr::VarP => 1,
            LossExpr::Add(a, b) | LossExpr::Sub(a, b) | LossExpr::Mul(a, b) | LossExpr::Div(a, b) => {
                1 + a.depth().max(b.depth())
            }
            LossExpr::Neg(a) | LossExpr::Pow(a, _) | LossExpr::Log(a) | LossExpr::Exp(a) | LossExpr::Abs(a) | LossExpr::Sign(a) => {
                1 + a.depth()
            }
        }
    }

    /// Plain evaluation; may return non-finite values.
    pub fn eval(&self, y: f64, p: f64) -> f64 {
        self.eval_inner(y, p, false)
    }

    fn eval_inner(&self, y: f64, p: f64, in_log: bool) -> f64 {
        match self {
            LossExpr::Const(c) => *c,
            LossExpr::VarY => y,
            LossExpr::VarP => {
                if in_log {
                    clamp_p(p)
                } else {
                    p
                }
            }
            LossExpr::Add(a, b) => a.eval_inner(y, p, in_log) + b.eval_inner(y, p, in_log),
            LossExpr::Sub(a, b) => a.eval_inner(y, p, in_log) - b.eval_inner(y, p, in_log),
            LossExpr::Mul(a, b) => a.eval_inner(y, p, in_log) * b.eval_inner(y, p, in_log),
            LossExpr::Div(a, b) => a.eval_inner(y, p, in_log) / b.eval_inner(y, p, in_log),
            LossExpr::Neg(a) => -a.eval_inner(y, p, in_log),
            LossExpr::Pow(a, e) => pow(a.eval_inner(y, p, in_log), *e),
            LossExpr::Log(a) => a.eval_inner(y, p, true).ln(),
            LossExpr::Exp(a) => a.eval_inner(y, p, in_log).exp(),
            LossExpr::Abs(a) => a.eval_inner(y, p, in_log).abs(),
            LossExpr::Sign(a) => {
                let v = a.eval_inner(y, p, in_log);
                if v > 0.0 {
                    1.0
                } else if v < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }
}

pub(crate) fn pow(base: f64, exponent: f64) -> f64 {
    if exponent.fract() == 0.0 && exponent.abs() <= f64::from(i32::MAX) {
        base.powi(exponent as i32)
    } else {
        base.powf(exponent)
    }
}

pub fn clamp_p(p: f64) -> f64 {
    p.clamp(P_CLAMP, 1.0 - P_CLAMP)
}

/// Evaluates one sample; a non-finite result fails the submission.
pub fn eval_loss(expr: &LossExpr, y: f64, p: f64) -> Result<f64, LossError> {
    let v = expr.eval(y, p);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(LossError::NonFinite { y, p })
    }
}

/// A parsed loss together with its derivative in `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossFunction {
    pub expr: LossExpr,
    pub gradient: LossExpr,
    clamp_gradient: bool,
}

impl LossFunction {
    pub fn new(expr: LossExpr) -> Self {
        let gradient = differentiate(&expr);
        let clamp_gradient = expr.logs_of_p();
        Self {
            expr,
            gradient,
            clamp_gradient,
        }
    }

    pub fn parse(text: &str) -> Result<Self, ParseError> {
        parse_loss(text).map(Self::new)
    }

    pub fn value(&self, y: f64, p: f64) -> Result<f64, LossError> {
        eval_loss(&self.expr, y, p)
    }

    /// dL/dp. When the loss takes `log` of an expression in `p`, the same
    /// clamp is applied to `p` here so the gradient stays finite at the ends.
    pub fn derivative(&self, y: f64, p: f64) -> Result<f64, LossError> {
        let p = if self.clamp_gradient { clamp_p(p) } else { p };
        let v = self.gradient.eval(y, p);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(LossError::NonFiniteGradient { y, p })
        }
    }

    /// Mean of the per-sample values.
    pub fn mean(&self, y: &[f64], p: &[f64]) -> Result<f64, LossError> {
        let mut total = 0.0;
        for (&a, &b) in y.iter().zip(p) {
            total += self.value(a, b)?;
        }
        Ok(total / y.len().max(1) as f64)
    }
}

const PREC_SUM: u8 = 1;
const PREC_PRODUCT: u8 = 2;
const PREC_FACTOR: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

impl LossExpr {
    fn precedence(&self) -> u8 {
        match self {
            LossExpr::Add(..) | LossExpr::Sub(..) => PREC_SUM,
            LossExpr::Mul(..) | LossExpr::Div(..) => PREC_PRODUCT,
            LossExpr::Neg(_) => PREC_FACTOR,
            LossExpr::Pow(..) => PREC_POW,
            LossExpr::Const(c) if c.is_sign_negative() => PREC_FACTOR,
            _ => PREC_ATOM,
        }
    }

    fn write_at(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        if self.precedence() < min_prec {
            f.write_str("(")?;
            self.write_at(f, 0)?;
            return f.write_str(")");
        }
        match self {
            LossExpr::Const(c) => write!(f, "{c}"),
            LossExpr::VarY => f.write_str("y"),
            LossExpr::VarP => f.write_str("p"),
            LossExpr::Add(a, b) => binary(f, a, " + ", b, PREC_SUM, PREC_PRODUCT),
            LossExpr::Sub(a, b) => binary(f, a, " - ", b, PREC_SUM, PREC_PRODUCT),
            LossExpr::Mul(a, b) => binary(f, a, " * ", b, PREC_PRODUCT, PREC_FACTOR),
            LossExpr::Div(a, b) => binary(f, a, " / ", b, PREC_PRODUCT, PREC_FACTOR),
            LossExpr::Neg(a) => {
                f.write_str("-")?;
                a.write_at(f, PREC_POW)
            }
            LossExpr::Pow(a, e) => {
                a.write_at(f, PREC_ATOM)?;
                write!(f, "^{e}")
            }
            LossExpr::Log(a) => call(f, "log", a),
            LossExpr::Exp(a) => call(f, "exp", a),
            LossExpr::Abs(a) => call(f, "abs", a),
            LossExpr::Sign(a) => call(f, "sign", a),
        }
    }
}

fn binary(
    f: &mut fmt::Formatter<'_>,
    a: &LossExpr,
    op: &str,
    b: &LossExpr,
    left: u8,
    right: u8,
) -> fmt::Result {
    a.write_at(f, left)?;
    f.write_str(op)?;
    b.write_at(f, right)
}

fn call(f: &mut fmt::Formatter<'_>, name: &str, a: &LossExpr) -> fmt::Result {
    write!(f, "{name}(")?;
    a.write_at(f, 0)?;
    f.write_str(")")
}

/// Canonical rendering; parses back to an equal tree for any expression the
/// parser can produce.
impl fmt::Display for LossExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_at(f, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn loss(s: &str) -> LossExpr {
        parse_loss(s).unwrap()
    }

    #[test]
    fn squared_error_value() {
        assert_eq!(eval_loss(&loss("(y - p)^2"), 1.0, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn constant_is_constant() {
        let e = loss("0");
        for (y, p) in [(0.0, 0.0), (5.0, -3.0), (1.0, 0.5)] {
            assert_eq!(eval_loss(&e, y, p).unwrap(), 0.0);
        }
    }

    #[test]
    fn cross_entropy_is_clamped() {
        let e = loss("-(y*log(p) + (1-y)*log(1-p))");
        let v = eval_loss(&e, 1.0, 1.0).unwrap();
        assert!(v.is_finite());
        let v = eval_loss(&e, 1.0, 0.0).unwrap();
        assert!((v - 12.0 * std::f64::consts::LN_10).abs() < 1e-9);
        let f = LossFunction::new(e);
        assert!(f.derivative(0.0, 1.0).unwrap().is_finite());
    }

    #[test]
    fn non_finite_is_an_error() {
        assert!(matches!(
            eval_loss(&loss("1/(p - p)"), 0.0, 0.5),
            Err(LossError::NonFinite { .. })
        ));
    }

    #[test]
    fn display_examples() {
        assert_eq!(loss("(y - p)^2").to_string(), "(y - p)^2");
        assert_eq!(loss("-p^2").to_string(), "-p^2");
        assert_eq!(loss("(-p)^2").to_string(), "(-p)^2");
        assert_eq!(loss("y - (p - 1)").to_string(), "y - (p - 1)");
        assert_eq!(loss("y*-p").to_string(), "y * -p");
        assert_eq!(loss("p^-0.5").to_string(), "p^-0.5");
    }

    #[test]
    fn mean_over_samples() {
        let f = LossFunction::parse("(y-p)^2").unwrap();
        assert_eq!(f.mean(&[1.0, 3.0], &[1.0, 1.0]).unwrap(), 2.0);
    }
}
