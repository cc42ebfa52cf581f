//! Canonical polynomial normal form of signal expressions.
//!
//! A [`NormalForm`] is a sum of monomials with exact rational coefficients
//! over a sorted multiset of atoms. Normalisation applies the commutative
//! ring axioms with constant folding; unary functions are opaque atoms whose
//! arguments are normalised recursively. Two expressions with equal normal
//! forms denote the same signal; the converse does not hold (for example
//! `sin(2u)` and `2 sin(u) cos(u)` stay distinct).
//!
//! Delays are pushed down to atoms. A shift with initial values splits into
//! a zero-initialised delay, which commutes with sums and nonempty products,
//! plus one impulse per initial value:
//!
//! ```text
//! shift(e, d, [i0, .., i(d-1)]) = delay(e, d) + i0*impulse(0) + .. + i(d-1)*impulse(d-1)
//! delay(a*b, d) = delay(a, d)*delay(b, d)
//! delay(c, d) = c - c*impulse(0) - .. - c*impulse(d-1)
//! ```

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::expr::{SeqEnv, SignalExpr};
use crate::model::UnaryOp;
use crate::rational::{format_exact, Rational};
use crate::value::{Interpretation, Value};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    Var(String),
    Time,
    IntState(String),
    Apply(UnaryOp, Box<NormalForm>),
    /// Zero-initialised delay of a Var, Time, IntState or Apply atom.
    Delay(Box<Atom>, usize),
    /// 1 at the given step, 0 elsewhere.
    Impulse(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial {
    /// Sorted; empty for the constant monomial.
    pub atoms: Vec<Atom>,
    pub coeff: Rational,
}

/// Monomials sorted by atoms, with distinct atom lists and nonzero
/// coefficients. The empty sum is zero.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NormalForm {
    terms: Vec<Monomial>,
}

impl NormalForm {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Rational) -> Self {
        Self::from_terms([(Vec::new(), c)])
    }

    pub fn atom(a: Atom) -> Self {
        Self::from_terms([(vec![a], Rational::one())])
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// The value if this is a constant polynomial.
    pub fn as_constant(&self) -> Option<Rational> {
        match self.terms.as_slice() {
            [] => Some(Rational::zero()),
            [m] if m.atoms.is_empty() => Some(m.coeff.clone()),
            _ => None,
        }
    }

    /// Collects terms, simplifying each atom list and merging duplicates.
    fn from_terms(terms: impl IntoIterator<Item = (Vec<Atom>, Rational)>) -> Self {
        let mut acc: BTreeMap<Vec<Atom>, Rational> = BTreeMap::new();
        for (atoms, coeff) in terms {
            if coeff.is_zero() {
                continue;
            }
            let Some(atoms) = simplify_atoms(atoms) else {
                continue;
            };
            *acc.entry(atoms).or_insert_with(Rational::zero) += coeff;
        }
        Self {
            terms: acc
                .into_iter()
                .filter(|(_, c)| !c.is_zero())
                .map(|(atoms, coeff)| Monomial { atoms, coeff })
                .collect(),
        }
    }

    pub fn add(&self, other: &NormalForm) -> NormalForm {
        Self::from_terms(
            self.terms
                .iter()
                .chain(&other.terms)
                .map(|m| (m.atoms.clone(), m.coeff.clone())),
        )
    }

    pub fn mul(&self, other: &NormalForm) -> NormalForm {
        Self::from_terms(self.terms.iter().flat_map(|a| {
            other.terms.iter().map(move |b| {
                let mut atoms = a.atoms.clone();
                atoms.extend(b.atoms.iter().cloned());
                (atoms, &a.coeff * &b.coeff)
            })
        }))
    }

    pub fn scale(&self, c: &Rational) -> NormalForm {
        Self::from_terms(self.terms.iter().map(|m| (m.atoms.clone(), &m.coeff * c)))
    }

    /// Zero-initialised delay by `depth` steps.
    pub fn delay(&self, depth: usize) -> NormalForm {
        if depth == 0 {
            return self.clone();
        }
        Self::from_terms(self.terms.iter().flat_map(|m| {
            if m.atoms.is_empty() {
                // a delayed constant is zero before `depth`
                let mut terms = vec![(Vec::new(), m.coeff.clone())];
                terms.extend((0..depth).map(|k| (vec![Atom::Impulse(k)], -m.coeff.clone())));
                terms
            } else {
                vec![(m.atoms.iter().map(|a| delay_atom(a, depth)).collect(), m.coeff.clone())]
            }
        }))
    }

    pub fn eval_at(&self, env: &SeqEnv, k: usize, interp: &dyn Interpretation) -> Value {
        self.terms.iter().fold(Value::zero(), |acc, m| {
            let v = m
                .atoms
                .iter()
                .fold(Value::Exact(m.coeff.clone()), |p, a| p.mul(&a.eval_at(env, k, interp)));
            acc.add(&v)
        })
    }

    /// An expression whose normal form is `self`.
    pub fn to_expr(&self) -> SignalExpr {
        let mut sum: Vec<SignalExpr> = self
            .terms
            .iter()
            .map(|m| {
                let mut factors = Vec::with_capacity(m.atoms.len() + 1);
                if !m.coeff.is_one() || m.atoms.is_empty() {
                    factors.push(SignalExpr::Rat(m.coeff.clone()));
                }
                factors.extend(m.atoms.iter().map(Atom::to_expr));
                collapse(factors, SignalExpr::Mul)
            })
            .collect();
        if sum.is_empty() {
            sum.push(SignalExpr::Rat(Rational::zero()));
        }
        collapse(sum, SignalExpr::Add)
    }
}

fn collapse(mut items: Vec<SignalExpr>, wrap: fn(Vec<SignalExpr>) -> SignalExpr) -> SignalExpr {
    if items.len() == 1 {
        items.pop().unwrap()
    } else {
        wrap(items)
    }
}

fn delay_atom(a: &Atom, depth: usize) -> Atom {
    match a {
        Atom::Delay(inner, d) => Atom::Delay(inner.clone(), d + depth),
        Atom::Impulse(at) => Atom::Impulse(at + depth),
        other => Atom::Delay(Box::new(other.clone()), depth),
    }
}

/// Sorts a product of atoms and applies the impulse identities;
/// `None` when the product is identically zero.
fn simplify_atoms(atoms: Vec<Atom>) -> Option<Vec<Atom>> {
    let mut impulse: Option<usize> = None;
    let mut max_delay = 0usize;
    let mut kept = Vec::with_capacity(atoms.len());
    for a in atoms {
        match a {
            // impulse(i)*impulse(j) is 0 for i != j, impulse(i) otherwise
            Atom::Impulse(at) => match impulse {
                Some(prev) if prev != at => return None,
                _ => impulse = Some(at),
            },
            other => {
                if let Atom::Delay(_, d) = &other {
                    max_delay = max_delay.max(*d);
                }
                kept.push(other);
            }
        }
    }
    if let Some(at) = impulse {
        // a delay of depth d > j vanishes at step j
        if at < max_delay {
            return None;
        }
        kept.push(Atom::Impulse(at));
    }
    kept.sort();
    Some(kept)
}

impl Atom {
    pub fn eval_at(&self, env: &SeqEnv, k: usize, interp: &dyn Interpretation) -> Value {
        match self {
            Atom::Var(name) => Value::Exact(env.input(name, k).clone()),
            Atom::Time => Value::Exact(env.time(k).clone()),
            Atom::IntState(id) => Value::Exact(env.state(id, k).clone()),
            Atom::Apply(op, arg) => interp.apply(*op, &arg.eval_at(env, k, interp)),
            Atom::Delay(inner, d) => {
                if k < *d {
                    Value::zero()
                } else {
                    inner.eval_at(env, k - d, interp)
                }
            }
            Atom::Impulse(at) => {
                if k == *at {
                    Value::one()
                } else {
                    Value::zero()
                }
            }
        }
    }

    fn to_expr(&self) -> SignalExpr {
        let zeros = |n: usize| vec![Rational::zero(); n];
        match self {
            Atom::Var(name) => SignalExpr::Var(name.clone()),
            Atom::Time => SignalExpr::Time,
            Atom::IntState(id) => SignalExpr::IntState(id.clone()),
            Atom::Apply(op, arg) => SignalExpr::apply(*op, arg.to_expr()),
            Atom::Delay(inner, d) => SignalExpr::shift(inner.to_expr(), *d, zeros(*d)),
            Atom::Impulse(at) => {
                let mut inits = zeros(at + 1);
                inits[*at] = Rational::one();
                SignalExpr::shift(SignalExpr::Rat(Rational::zero()), at + 1, inits)
            }
        }
    }
}

/// Canonical normal form of `e`.
pub fn normalize(e: &SignalExpr) -> NormalForm {
    match e {
        SignalExpr::Var(name) => NormalForm::atom(Atom::Var(name.clone())),
        SignalExpr::Time => NormalForm::atom(Atom::Time),
        SignalExpr::IntState(id) => NormalForm::atom(Atom::IntState(id.clone())),
        SignalExpr::Rat(r) => NormalForm::constant(r.clone()),
        SignalExpr::Add(xs) => xs.iter().fold(NormalForm::zero(), |acc, x| acc.add(&normalize(x))),
        SignalExpr::Mul(xs) => xs
            .iter()
            .fold(NormalForm::constant(Rational::one()), |acc, x| acc.mul(&normalize(x))),
        SignalExpr::Apply(op, x) => apply(*op, normalize(x)),
        SignalExpr::Shift { arg, depth, inits } => {
            let impulses = NormalForm::from_terms(
                inits
                    .iter()
                    .enumerate()
                    .map(|(k, c)| (vec![Atom::Impulse(k)], c.clone())),
            );
            normalize(arg).delay(*depth).add(&impulses)
        }
    }
}

fn apply(op: UnaryOp, arg: NormalForm) -> NormalForm {
    let minus_one = -Rational::one();
    if let Some(c) = arg.as_constant() {
        match op {
            UnaryOp::Neg => return NormalForm::constant(-c),
            UnaryOp::Abs => return NormalForm::constant(c.abs()),
            UnaryOp::Sin if c.is_zero() => return NormalForm::zero(),
            UnaryOp::Cos if c.is_zero() => return NormalForm::constant(Rational::one()),
            _ => {}
        }
    }
    match op {
        UnaryOp::Neg => arg.scale(&minus_one),
        UnaryOp::Abs => {
            // |c*m| = |c|*|m|, and |p| = |-p| with the leading coefficient made positive
            if let [m] = arg.terms() {
                let unit = NormalForm::from_terms([(m.atoms.clone(), Rational::one())]);
                return NormalForm::atom(Atom::Apply(UnaryOp::Abs, Box::new(unit))).scale(&m.coeff.abs());
            }
            let arg = if arg.terms()[0].coeff.is_negative() {
                arg.scale(&minus_one)
            } else {
                arg
            };
            NormalForm::atom(Atom::Apply(UnaryOp::Abs, Box::new(arg)))
        }
        UnaryOp::Sin | UnaryOp::Cos => NormalForm::atom(Atom::Apply(op, Box::new(arg))),
    }
}

/// Syntactic equality of canonical forms.
pub fn equal_normal(a: &NormalForm, b: &NormalForm) -> bool {
    a == b
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Var(name) | Atom::IntState(name) => f.write_str(name),
            Atom::Time => f.write_str("t"),
            Atom::Apply(op, arg) => write!(f, "{op}({arg})"),
            Atom::Delay(inner, d) => write!(f, "shift({inner}, {d})"),
            Atom::Impulse(at) => write!(f, "impulse({at})"),
        }
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        let c = &self.coeff;
        if self.atoms.is_empty() {
            return f.write_str(&format_exact(c));
        }
        if c == &-Rational::one() {
            f.write_str("-")?;
        } else if !c.is_one() {
            write!(f, "{}", format_exact(c))?;
            first = false;
        }
        let mut i = 0;
        while i < self.atoms.len() {
            let a = &self.atoms[i];
            let mut power = 1;
            while i + power < self.atoms.len() && &self.atoms[i + power] == a {
                power += 1;
            }
            if !first {
                f.write_str("*")?;
            }
            first = false;
            write!(f, "{a}")?;
            if power > 1 {
                write!(f, "^{power}")?;
            }
            i += power;
        }
        Ok(())
    }
}

impl fmt::Display for NormalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, m) in self.terms.iter().enumerate() {
            if i == 0 {
                write!(f, "{m}")?;
            } else if m.coeff.is_negative() {
                let flipped = Monomial {
                    atoms: m.atoms.clone(),
                    coeff: -m.coeff.clone(),
                };
                write!(f, " - {flipped}")?;
            } else {
                write!(f, " + {m}")?;
            }
        }
        Ok(())
    }
}
