//! Counterexample search over exact input assignments.
//!
//! Points are tried in a fixed order: first the grid {-2, -1, 0, 1, 2}^n in
//! lexicographic order (first variable most significant), then `budget`
//! random rationals from a seeded generator. For discrete systems each point
//! is a set of input sequences; grid points hold every input constant.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::expr::SeqEnv;
use crate::extract::EquationSystem;
use crate::model::ModelClass;
use crate::rational::{int, ratio, Rational};
use crate::value::{RealFunctions, Value};

/// At most this many grid points are enumerated (5^6).
pub const GRID_CAP: usize = 15_625;

/// Name under which the time variable appears in an unsampled assignment.
pub const TIME_VAR: &str = "t";

/// A point at which two equation systems evaluate differently.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolicCounterexample {
    pub output: String,
    /// Step index; always 0 for unsampled systems.
    pub step: usize,
    /// Input sequences and sample times. Unsampled points have length-1
    /// sequences and a time only when a Clock is used.
    pub env: SeqEnv,
    pub value_a: Value,
    pub value_b: Value,
}

impl SymbolicCounterexample {
    /// Re-evaluates both systems at the stored point; `Some` when they still differ.
    pub fn replay(&self, a: &EquationSystem, b: &EquationSystem) -> Option<(Value, Value)> {
        let va = a
            .outputs
            .get(&self.output)?
            .eval_at(&self.env, self.step, &RealFunctions);
        let vb = b
            .outputs
            .get(&self.output)?
            .eval_at(&self.env, self.step, &RealFunctions);
        va.differs(&vb).then_some((va, vb))
    }
}

struct Search<'a> {
    a: &'a EquationSystem,
    b: &'a EquationSystem,
    inputs: Vec<String>,
    with_time: bool,
    steps: usize,
    times: Vec<Rational>,
}

impl Search<'_> {
    fn vars(&self) -> usize {
        self.inputs.len() + usize::from(self.with_time)
    }

    /// `values[v][k]` is variable `v` at step `k`.
    fn env(&self, mut values: Vec<Vec<Rational>>) -> SeqEnv {
        let times = if self.with_time {
            values.pop().expect("time column")
        } else {
            self.times.clone()
        };
        SeqEnv {
            inputs: self.inputs.iter().cloned().zip(values).collect(),
            times,
            states: BTreeMap::new(),
        }
    }

    fn try_env(&self, env: SeqEnv) -> Option<SymbolicCounterexample> {
        for step in 0..self.steps {
            for (name, ea) in &self.a.outputs {
                let Some(eb) = self.b.outputs.get(name) else {
                    continue;
                };
                let va = ea.eval_at(&env, step, &RealFunctions);
                let vb = eb.eval_at(&env, step, &RealFunctions);
                if va.differs(&vb) {
                    return Some(SymbolicCounterexample {
                        output: name.clone(),
                        step,
                        env,
                        value_a: va,
                        value_b: vb,
                    });
                }
            }
        }
        None
    }
}

fn random_rational(rng: &mut ChaCha8Rng) -> Rational {
    ratio(rng.gen_range(-64..=64), rng.gen_range(1..=16))
}

/// First assignment on which `a` and `b` differ, or `None` after the grid
/// and `budget` random points. Both systems must be unsampled or discrete.
pub fn find_counterexample(
    a: &EquationSystem,
    b: &EquationSystem,
    budget: usize,
    seed: u64,
) -> Option<SymbolicCounterexample> {
    assert!(
        a.state_defs.is_empty() && b.state_defs.is_empty(),
        "search runs on stateless equations only"
    );
    let discrete = a.class == ModelClass::Discrete || b.class == ModelClass::Discrete;
    let mut inputs = a.inputs.clone();
    for name in &b.inputs {
        if !inputs.contains(name) {
            inputs.push(name.clone());
        }
    }
    inputs.sort();
    let steps = if discrete {
        a.max_delay().max(b.max_delay()) + 2
    } else {
        1
    };
    let search = Search {
        a,
        b,
        inputs,
        with_time: !discrete && (a.uses_time() || b.uses_time()),
        steps,
        // unsampled systems without a clock get no time column at all
        times: if discrete {
            (0..steps).map(|k| int(k as i64) * &a.sample_time).collect()
        } else {
            Vec::new()
        },
    };
    let n = search.vars();

    let grid = 5usize.checked_pow(n as u32).unwrap_or(usize::MAX).min(GRID_CAP);
    for index in 0..grid {
        let mut values = vec![Vec::new(); n];
        let mut rest = index;
        for v in (0..n).rev() {
            let digit = (rest % 5) as i64;
            rest /= 5;
            values[v] = vec![int(digit - 2); steps];
        }
        if let Some(cx) = search.try_env(search.env(values)) {
            return Some(cx);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..budget {
        let values: Vec<Vec<Rational>> = (0..n)
            .map(|_| (0..steps).map(|_| random_rational(&mut rng)).collect())
            .collect();
        if let Some(cx) = search.try_env(search.env(values)) {
            return Some(cx);
        }
    }
    None
}
