//! Signal expressions: the equation form of a block diagram.

use std::collections::BTreeMap;
use std::fmt;

use crate::model::UnaryOp;
use crate::rational::{format_exact, Rational};
use crate::value::{Interpretation, Value};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SignalExpr {
    /// An Inport signal.
    Var(String),
    Time,
    Rat(Rational),
    Add(Vec<SignalExpr>),
    Mul(Vec<SignalExpr>),
    Apply(UnaryOp, Box<SignalExpr>),
    /// `arg` delayed by `depth` steps; `inits[k]` is emitted at step k < depth.
    Shift {
        arg: Box<SignalExpr>,
        depth: usize,
        inits: Vec<Rational>,
    },
    /// Accumulator of an Integrator block.
    IntState(String),
}

impl SignalExpr {
    pub fn var(name: impl Into<String>) -> Self {
        SignalExpr::Var(name.into())
    }

    pub fn rat(r: Rational) -> Self {
        SignalExpr::Rat(r)
    }

    pub fn apply(op: UnaryOp, arg: SignalExpr) -> Self {
        SignalExpr::Apply(op, Box::new(arg))
    }

    /// Delays `arg` by `depth` steps, merging with an inner shift:
    /// shift(shift(e, d1, i1), d2, i2) = shift(e, d1 + d2, i2 ++ i1).
    pub fn shift(arg: SignalExpr, depth: usize, mut inits: Vec<Rational>) -> Self {
        assert_eq!(inits.len(), depth, "one initial value per delay step");
        match arg {
            SignalExpr::Shift {
                arg: inner,
                depth: inner_depth,
                inits: inner_inits,
            } => {
                inits.extend(inner_inits);
                SignalExpr::Shift {
                    arg: inner,
                    depth: depth + inner_depth,
                    inits,
                }
            }
            arg => SignalExpr::Shift {
                arg: Box::new(arg),
                depth,
                inits,
            },
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        1 + match self {
            SignalExpr::Add(xs) | SignalExpr::Mul(xs) => xs.iter().map(Self::size).sum(),
            SignalExpr::Apply(_, x) => x.size(),
            SignalExpr::Shift { arg, .. } => arg.size(),
            _ => 0,
        }
    }

    /// Largest total delay along any path from the root.
    pub fn max_delay(&self) -> usize {
        match self {
            SignalExpr::Add(xs) | SignalExpr::Mul(xs) => xs.iter().map(Self::max_delay).max().unwrap_or(0),
            SignalExpr::Apply(_, x) => x.max_delay(),
            SignalExpr::Shift { arg, depth, .. } => depth + arg.max_delay(),
            _ => 0,
        }
    }

    pub fn uses_time(&self) -> bool {
        match self {
            SignalExpr::Time => true,
            SignalExpr::Add(xs) | SignalExpr::Mul(xs) => xs.iter().any(Self::uses_time),
            SignalExpr::Apply(_, x) => x.uses_time(),
            SignalExpr::Shift { arg, .. } => arg.uses_time(),
            _ => false,
        }
    }

    /// Evaluates at step `k` of the input sequences in `env`.
    pub fn eval_at(&self, env: &SeqEnv, k: usize, interp: &dyn Interpretation) -> Value {
        match self {
            SignalExpr::Var(name) => Value::Exact(env.input(name, k).clone()),
            SignalExpr::Time => Value::Exact(env.time(k).clone()),
            SignalExpr::IntState(id) => Value::Exact(env.state(id, k).clone()),
            SignalExpr::Rat(r) => Value::Exact(r.clone()),
            SignalExpr::Add(xs) => xs[1..].iter().fold(xs[0].eval_at(env, k, interp), |acc, x| {
                acc.add(&x.eval_at(env, k, interp))
            }),
            SignalExpr::Mul(xs) => xs[1..].iter().fold(xs[0].eval_at(env, k, interp), |acc, x| {
                acc.mul(&x.eval_at(env, k, interp))
            }),
            SignalExpr::Apply(op, x) => interp.apply(*op, &x.eval_at(env, k, interp)),
            SignalExpr::Shift { arg, depth, inits } => {
                if k < *depth {
                    Value::Exact(inits[k].clone())
                } else {
                    arg.eval_at(env, k - depth, interp)
                }
            }
        }
    }
}

/// Exact input sequences for symbolic evaluation. A single-point valuation
/// is a sequence of length one.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SeqEnv {
    pub inputs: BTreeMap<String, Vec<Rational>>,
    pub times: Vec<Rational>,
    pub states: BTreeMap<String, Vec<Rational>>,
}

impl SeqEnv {
    fn lookup<'a>(map: &'a BTreeMap<String, Vec<Rational>>, what: &str, name: &str, k: usize) -> &'a Rational {
        map.get(name)
            .and_then(|seq| seq.get(k))
            .unwrap_or_else(|| panic!("no {what} value for `{name}` at step {k}"))
    }

    pub fn input(&self, name: &str, k: usize) -> &Rational {
        Self::lookup(&self.inputs, "input", name, k)
    }

    pub fn state(&self, id: &str, k: usize) -> &Rational {
        Self::lookup(&self.states, "state", id, k)
    }

    pub fn time(&self, k: usize) -> &Rational {
        self.times.get(k).unwrap_or_else(|| panic!("no time value at step {k}"))
    }
}

fn needs_parens(e: &SignalExpr) -> bool {
    match e {
        SignalExpr::Add(_) => true,
        SignalExpr::Rat(r) => r < &Rational::from_integer(0.into()),
        _ => false,
    }
}

impl fmt::Display for SignalExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SignalExpr::Var(name) | SignalExpr::IntState(name) => f.write_str(name),
            SignalExpr::Time => f.write_str("t"),
            SignalExpr::Rat(r) => f.write_str(&format_exact(r)),
            SignalExpr::Add(xs) => {
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" + ")?;
                    }
                    write!(f, "{x}")?;
                }
                Ok(())
            }
            SignalExpr::Mul(xs) => {
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        f.write_str("*")?;
                    }
                    if needs_parens(x) && (i > 0 || matches!(x, SignalExpr::Add(_))) {
                        write!(f, "({x})")?;
                    } else {
                        write!(f, "{x}")?;
                    }
                }
                Ok(())
            }
            SignalExpr::Apply(op, x) => write!(f, "{op}({x})"),
            SignalExpr::Shift { arg, depth, inits } => {
                write!(f, "shift({arg}, {depth}, [")?;
                for (i, r) in inits.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    f.write_str(&format_exact(r))?;
                }
                f.write_str("])")
            }
        }
    }
}
