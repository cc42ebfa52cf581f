//! Equation extraction: one expression per Outport over Inports, time and
//! state, obtained by substituting block semantics along the wires.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::expr::SignalExpr;
use crate::model::{BlockKind, ModelClass, Sign};
use crate::normal::{normalize, NormalForm};
use crate::rational::{int, Rational};
use crate::validate::ValidatedModel;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractError {
    #[error("{0} models are not supported")]
    Unsupported(ModelClass),
    /// A UnitDelay on a feedback cycle defines a recurrence, which has no
    /// finite shift expression.
    #[error("discrete feedback through UnitDelay `{0}` has no closed equation")]
    DiscreteFeedback(String),
}

/// Initial value and derivative of one Integrator.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDef {
    pub init: Rational,
    pub derivative: SignalExpr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquationSystem {
    pub class: ModelClass,
    /// Inport names, sorted.
    pub inputs: Vec<String>,
    pub outputs: BTreeMap<String, SignalExpr>,
    /// Integrator states (continuous models only).
    pub state_defs: BTreeMap<String, StateDef>,
    pub sample_time: Rational,
}

impl EquationSystem {
    /// Normal form of every output.
    pub fn normalized(&self) -> BTreeMap<String, NormalForm> {
        self.outputs
            .iter()
            .map(|(name, e)| (name.clone(), normalize(e)))
            .collect()
    }

    pub fn max_delay(&self) -> usize {
        self.outputs.values().map(SignalExpr::max_delay).max().unwrap_or(0)
    }

    pub fn uses_time(&self) -> bool {
        self.outputs.values().any(SignalExpr::uses_time) || self.state_defs.values().any(|d| d.derivative.uses_time())
    }

    /// Text form with normalised right-hand sides.
    pub fn display_normalized(&self) -> NormalizedDisplay<'_> {
        NormalizedDisplay(self)
    }
}

/// `x' = ...` lines for the states, then `y = ...` lines for the outputs.
impl fmt::Display for EquationSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (id, def) in &self.state_defs {
            writeln!(f, "{id}' = {}", def.derivative)?;
            writeln!(f, "{id}(0) = {}", crate::rational::format_exact(&def.init))?;
        }
        for (name, e) in &self.outputs {
            writeln!(f, "{name} = {e}")?;
        }
        Ok(())
    }
}

pub struct NormalizedDisplay<'a>(&'a EquationSystem);

impl fmt::Display for NormalizedDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (id, def) in &self.0.state_defs {
            writeln!(f, "{id}' = {}", normalize(&def.derivative))?;
            writeln!(f, "{id}(0) = {}", crate::rational::format_exact(&def.init))?;
        }
        for (name, e) in &self.0.outputs {
            writeln!(f, "{name} = {}", normalize(e))?;
        }
        Ok(())
    }
}

struct Extractor<'a> {
    model: &'a ValidatedModel,
    memo: Vec<Option<SignalExpr>>,
    on_stack: Vec<bool>,
}

impl Extractor<'_> {
    fn input(&mut self, b: usize, port: usize) -> Result<SignalExpr, ExtractError> {
        self.output(self.model.drivers(b)[port])
    }

    fn output(&mut self, b: usize) -> Result<SignalExpr, ExtractError> {
        if let Some(e) = &self.memo[b] {
            return Ok(e.clone());
        }
        if self.on_stack[b] {
            // validation rules out feedthrough cycles, so this cycle holds a delay
            let delay = self
                .model
                .blocks_where(|k| matches!(k, BlockKind::UnitDelay { .. }))
                .into_iter()
                .find(|&d| self.on_stack[d])
                .unwrap_or(b);
            return Err(ExtractError::DiscreteFeedback(self.model.id(delay).to_string()));
        }
        self.on_stack[b] = true;
        let e = match self.model.kind(b) {
            BlockKind::Inport => SignalExpr::Var(self.model.id(b).to_string()),
            BlockKind::Outport => self.input(b, 0)?,
            BlockKind::Constant { value } => SignalExpr::Rat(value.clone()),
            BlockKind::Clock => SignalExpr::Time,
            BlockKind::Gain { k } => SignalExpr::Mul(vec![SignalExpr::Rat(k.clone()), self.input(b, 0)?]),
            BlockKind::Sum { signs } => {
                let mut terms = Vec::with_capacity(signs.len());
                for (port, sign) in signs.iter().enumerate() {
                    let x = self.input(b, port)?;
                    terms.push(match sign {
                        Sign::Plus => x,
                        Sign::Minus => SignalExpr::Mul(vec![SignalExpr::Rat(int(-1)), x]),
                    });
                }
                SignalExpr::Add(terms)
            }
            BlockKind::Product { arity } => {
                let mut factors = Vec::with_capacity(*arity);
                for port in 0..*arity {
                    factors.push(self.input(b, port)?);
                }
                SignalExpr::Mul(factors)
            }
            BlockKind::UnaryFn { op } => SignalExpr::apply(*op, self.input(b, 0)?),
            BlockKind::UnitDelay { init } => SignalExpr::shift(self.input(b, 0)?, 1, vec![init.clone()]),
            BlockKind::Integrator { .. } => SignalExpr::IntState(self.model.id(b).to_string()),
        };
        self.on_stack[b] = false;
        self.memo[b] = Some(e.clone());
        Ok(e)
    }
}

pub fn extract(model: &ValidatedModel) -> Result<EquationSystem, ExtractError> {
    let class = model.class();
    if class == ModelClass::Hybrid {
        return Err(ExtractError::Unsupported(class));
    }
    let mut ex = Extractor {
        model,
        memo: vec![None; model.len()],
        on_stack: vec![false; model.len()],
    };
    let mut outputs = BTreeMap::new();
    for b in model.outports() {
        outputs.insert(model.id(b).to_string(), ex.output(b)?);
    }
    let mut state_defs = BTreeMap::new();
    for b in model.blocks_where(|k| matches!(k, BlockKind::Integrator { .. })) {
        let BlockKind::Integrator { init } = model.kind(b) else {
            unreachable!()
        };
        let derivative = ex.input(b, 0)?;
        state_defs.insert(
            model.id(b).to_string(),
            StateDef {
                init: init.clone(),
                derivative,
            },
        );
    }
    Ok(EquationSystem {
        class,
        inputs: model.inports().iter().map(|&i| model.id(i).to_string()).collect(),
        outputs,
        state_defs,
        sample_time: model.model().sample_time.clone(),
    })
}
