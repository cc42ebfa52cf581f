//! Values of the symbolic evaluation path.
//!
//! Arithmetic stays exact until a transcendental function is applied to a
//! nonzero argument; from then on the value is carried as an f64.

use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::model::UnaryOp;
use crate::rational::{format_exact, to_f64, Rational};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Exact(Rational),
    Approx(f64),
}

/// Relative tolerance under which approximate values are considered equal.
pub const APPROX_RTOL: f64 = 1e-9;

impl Value {
    pub fn zero() -> Self {
        Value::Exact(Rational::zero())
    }

    pub fn one() -> Self {
        Value::Exact(Rational::one())
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Value::Exact(r) => to_f64(r),
            Value::Approx(x) => *x,
        }
    }

    pub fn as_exact(&self) -> Option<&Rational> {
        match self {
            Value::Exact(r) => Some(r),
            Value::Approx(_) => None,
        }
    }

    pub fn add(&self, other: &Value) -> Value {
        match (self, other) {
            (Value::Exact(a), Value::Exact(b)) => Value::Exact(a + b),
            _ => Value::Approx(self.to_f64() + other.to_f64()),
        }
    }

    pub fn mul(&self, other: &Value) -> Value {
        match (self, other) {
            (Value::Exact(a), Value::Exact(b)) => Value::Exact(a * b),
            _ => Value::Approx(self.to_f64() * other.to_f64()),
        }
    }

    /// Whether two values certainly differ: exactly for rationals, beyond
    /// [`APPROX_RTOL`] once either side is approximate.
    pub fn differs(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Exact(a), Value::Exact(b)) => a != b,
            _ => {
                let (a, b) = (self.to_f64(), other.to_f64());
                if !(a.is_finite() && b.is_finite()) {
                    return a != b;
                }
                (a - b).abs() > APPROX_RTOL * 1f64.max(a.abs()).max(b.abs())
            }
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Exact(r) => f.write_str(&format_exact(r)),
            Value::Approx(x) => write!(f, "{x:e}"),
        }
    }
}

/// How unary functions are interpreted during symbolic evaluation.
pub trait Interpretation {
    fn apply(&self, op: UnaryOp, arg: &Value) -> Value;
}

/// The real functions; exact where the result is rational.
#[derive(Debug, Clone, Copy, Default)]
pub struct RealFunctions;

impl Interpretation for RealFunctions {
    fn apply(&self, op: UnaryOp, arg: &Value) -> Value {
        match (op, arg) {
            (UnaryOp::Neg, Value::Exact(r)) => Value::Exact(-r),
            (UnaryOp::Abs, Value::Exact(r)) => Value::Exact(r.abs()),
            (UnaryOp::Sin, Value::Exact(r)) if r.is_zero() => Value::zero(),
            (UnaryOp::Cos, Value::Exact(r)) if r.is_zero() => Value::one(),
            _ => Value::Approx(op.apply_f64(arg.to_f64())),
        }
    }
}

/// Exact rational stand-ins for sin and cos.
///
/// Ring normalisation treats sin and cos as uninterpreted symbols, so it is
/// sound for every interpretation of them; this one keeps evaluation exact.
/// Neg and abs keep their real meaning.
#[derive(Debug, Clone, Copy, Default)]
pub struct OpaqueFunctions;

impl Interpretation for OpaqueFunctions {
    fn apply(&self, op: UnaryOp, arg: &Value) -> Value {
        let Value::Exact(r) = arg else {
            return RealFunctions.apply(op, arg);
        };
        let denom = Rational::one() + r * r;
        Value::Exact(match op {
            UnaryOp::Neg => -r,
            UnaryOp::Abs => r.abs(),
            UnaryOp::Sin => r / denom,
            UnaryOp::Cos => Rational::one() / denom,
        })
    }
}
