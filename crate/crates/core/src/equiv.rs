//! Equivalence verdicts for model pairs.
//!
//! Unsampled and discrete pairs are compared through the normal forms of
//! their output equations, with counterexample search when the forms differ.
//! Continuous pairs are simulated under shared scenarios and compared
//! against an epsilon tube at every major step.

use std::collections::BTreeSet;

use rayon::prelude::*;
use thiserror::Error;

use crate::extract::{extract, EquationSystem, ExtractError};
use crate::model::ModelClass;
use crate::normal::equal_normal;
use crate::scenario::{Scenario, DEFAULT_SEED};
use crate::search::{find_counterexample, SymbolicCounterexample};
use crate::sim::{simulate, Deviation, Method, SimError, SolverConfig};
use crate::validate::ValidatedModel;

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Verdict {
    ExactEquivalent,
    ApproxEquivalent {
        eps_measured: f64,
        /// Pair tube from [`epsilon_bound`], when L and M were supplied.
        eps_bound: Option<f64>,
    },
    NotEquivalent(Counterexample),
    Unknown(String),
    Unsupported(String),
}

impl Verdict {
    pub fn kind(&self) -> &'static str {
        match self {
            Verdict::ExactEquivalent => "exact_equivalent",
            Verdict::ApproxEquivalent { .. } => "approx_equivalent",
            Verdict::NotEquivalent(_) => "not_equivalent",
            Verdict::Unknown(_) => "unknown",
            Verdict::Unsupported(_) => "unsupported",
        }
    }

    pub fn is_equivalent(&self) -> bool {
        matches!(self, Verdict::ExactEquivalent | Verdict::ApproxEquivalent { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Counterexample {
    Symbolic(SymbolicCounterexample),
    Trace(TraceCounterexample),
}

/// Worst tube violation of a continuous pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceCounterexample {
    /// Index into [`TubeConfig::effective_scenarios`].
    pub scenario: usize,
    pub step: usize,
    pub time: f64,
    pub signal: String,
    pub value_a: f64,
    pub value_b: f64,
}

impl TraceCounterexample {
    /// Re-simulates the scenario and returns the deviation at the stored
    /// step and signal.
    pub fn replay(&self, a: &ValidatedModel, b: &ValidatedModel, tube: &TubeConfig) -> Result<f64, SimError> {
        let scenario = &tube.effective_scenarios(a)[self.scenario];
        let ta = simulate(a, scenario, &tube.cfg)?;
        let tb = simulate(b, scenario, &tube.cfg)?;
        let va = ta.signal(&self.signal).map_or(f64::NAN, |s| s[self.step]);
        let vb = tb.signal(&self.signal).map_or(f64::NAN, |s| s[self.step]);
        Ok((va - vb).abs())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CheckError {
    #[error("interface mismatch: inports {inports_a:?} vs {inports_b:?}, outports {outports_a:?} vs {outports_b:?}")]
    InterfaceMismatch {
        inports_a: Vec<String>,
        inports_b: Vec<String>,
        outports_a: Vec<String>,
        outports_b: Vec<String>,
    },
    #[error("continuous models need a tube configuration with an epsilon")]
    MissingTube,
    #[error("invalid tube configuration: {0}")]
    InvalidTube(String),
    #[error(transparent)]
    Simulation(#[from] SimError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TubeConfig {
    pub epsilon: f64,
    pub lipschitz: Option<f64>,
    pub deriv_bound: Option<f64>,
    pub cfg: SolverConfig,
    /// Inports missing from a scenario get seeded noise; an empty list means
    /// a single all-noise scenario.
    pub scenarios: Vec<Scenario>,
}

impl TubeConfig {
    pub fn new(epsilon: f64, cfg: SolverConfig) -> Result<Self, CheckError> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(CheckError::InvalidTube(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        Ok(TubeConfig {
            epsilon,
            lipschitz: None,
            deriv_bound: None,
            cfg,
            scenarios: Vec::new(),
        })
    }

    pub fn with_bounds(mut self, lipschitz: f64, deriv_bound: f64) -> Result<Self, CheckError> {
        for (name, v) in [("lipschitz", lipschitz), ("deriv_bound", deriv_bound)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CheckError::InvalidTube(format!("{name} must be positive, got {v}")));
            }
        }
        self.lipschitz = Some(lipschitz);
        self.deriv_bound = Some(deriv_bound);
        Ok(self)
    }

    pub fn with_scenarios(mut self, scenarios: Vec<Scenario>) -> Self {
        self.scenarios = scenarios;
        self
    }

    /// The scenarios actually simulated for `model`.
    pub fn effective_scenarios(&self, model: &ValidatedModel) -> Vec<Scenario> {
        let inports = model.model().inport_names();
        if self.scenarios.is_empty() {
            return vec![Scenario::new().fill_defaults(&inports)];
        }
        self.scenarios
            .iter()
            .map(|s| s.clone().fill_defaults(&inports))
            .collect()
    }

    /// Pair tube `bound(A) + bound(B)` when both constants are known.
    pub fn pair_bound(&self) -> Option<f64> {
        let (l, m) = (self.lipschitz?, self.deriv_bound?);
        let c = &self.cfg;
        Some(2.0 * epsilon_bound(l, m, c.method, c.h, c.t0, c.t_end))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchConfig {
    pub seed: u64,
    /// Random points tried after the grid.
    pub budget: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            seed: DEFAULT_SEED,
            budget: 256,
        }
    }
}

/// A-priori global error bound of a one-step method of order p:
/// `(C h^p / L) (e^{L (T - t0)} - 1)` with C = M/2 for Euler and C = M for RK4.
pub fn epsilon_bound(lipschitz: f64, deriv_bound: f64, method: Method, h: f64, t0: f64, t_end: f64) -> f64 {
    let c = match method {
        Method::ForwardEuler => deriv_bound / 2.0,
        Method::Rk4 => deriv_bound,
    };
    c * h.powi(method.order() as i32) / lipschitz * (lipschitz * (t_end - t0)).exp_m1()
}

/// Structural equality ignoring the model name.
fn same_diagram(a: &ValidatedModel, b: &ValidatedModel) -> bool {
    let mut b = b.model().clone();
    b.name.clone_from(&a.model().name);
    a.model().structurally_eq(&b)
}

fn names(model: &ValidatedModel, ports: Vec<usize>) -> Vec<String> {
    let set: BTreeSet<String> = ports.into_iter().map(|i| model.id(i).to_string()).collect();
    set.into_iter().collect()
}

/// Decides equivalence of `a` and `b`. `tube` is needed only for continuous pairs.
pub fn check(
    a: &ValidatedModel,
    b: &ValidatedModel,
    tube: Option<&TubeConfig>,
    search: &SearchConfig,
) -> Result<Verdict, CheckError> {
    let (inports_a, inports_b) = (names(a, a.inports()), names(b, b.inports()));
    let (outports_a, outports_b) = (names(a, a.outports()), names(b, b.outports()));
    if inports_a != inports_b || outports_a != outports_b {
        return Err(CheckError::InterfaceMismatch {
            inports_a,
            inports_b,
            outports_a,
            outports_b,
        });
    }
    match (a.class(), b.class()) {
        (ModelClass::Hybrid, _) | (_, ModelClass::Hybrid) => {
            Ok(Verdict::Unsupported("hybrid models are future work".into()))
        }
        // an unsampled model is a function of time and inputs, so it can stand
        // in for the analytic solution of a continuous one
        (ModelClass::Continuous, ModelClass::Continuous | ModelClass::Unsampled)
        | (ModelClass::Unsampled, ModelClass::Continuous) => {
            check_continuous(a, b, tube.ok_or(CheckError::MissingTube)?)
        }
        (ca, cb) if ca != cb => Ok(Verdict::Unsupported("class mismatch".into())),
        (class, _) => {
            let (ea, eb) = match (extract(a), extract(b)) {
                (Ok(ea), Ok(eb)) => (ea, eb),
                (Err(e), _) | (_, Err(e)) => {
                    if same_diagram(a, b) {
                        return Ok(Verdict::ExactEquivalent);
                    }
                    return Ok(match e {
                        ExtractError::DiscreteFeedback(_) => Verdict::Unsupported(e.to_string()),
                        ExtractError::Unsupported(_) => Verdict::Unsupported(e.to_string()),
                    });
                }
            };
            Ok(match class {
                ModelClass::Unsampled => check_unsampled(&ea, &eb, search),
                _ => check_discrete(&ea, &eb, search),
            })
        }
    }
}

fn compare_equations(a: &EquationSystem, b: &EquationSystem, search: &SearchConfig) -> Verdict {
    let (na, nb) = (a.normalized(), b.normalized());
    let same = na.len() == nb.len()
        && na
            .iter()
            .all(|(name, fa)| nb.get(name).is_some_and(|fb| equal_normal(fa, fb)));
    if same {
        return Verdict::ExactEquivalent;
    }
    match find_counterexample(a, b, search.budget, search.seed) {
        Some(cx) => Verdict::NotEquivalent(Counterexample::Symbolic(cx)),
        None => Verdict::Unknown(format!(
            "normal forms differ but no counterexample found in the grid and {} random points",
            search.budget
        )),
    }
}

pub fn check_unsampled(a: &EquationSystem, b: &EquationSystem, search: &SearchConfig) -> Verdict {
    compare_equations(a, b, search)
}

/// Normal forms carry init prefixes as impulse terms, so a pair differing only
/// in inits differs at some step below the total delay depth, and the step-ordered
/// search reports the first such step.
pub fn check_discrete(a: &EquationSystem, b: &EquationSystem, search: &SearchConfig) -> Verdict {
    compare_equations(a, b, search)
}

pub fn check_continuous(a: &ValidatedModel, b: &ValidatedModel, tube: &TubeConfig) -> Result<Verdict, CheckError> {
    let scenarios = tube.effective_scenarios(a);
    let per_scenario: Vec<Result<Option<Deviation>, SimError>> = scenarios
        .par_iter()
        .map(|s| {
            let ta = simulate(a, s, &tube.cfg)?;
            let tb = simulate(b, s, &tube.cfg)?;
            Ok(ta.max_deviation(&tb))
        })
        .collect();
    let mut worst: Option<(usize, Deviation)> = None;
    for (i, result) in per_scenario.into_iter().enumerate() {
        let dev = match result {
            Ok(dev) => dev,
            Err(SimError::NumericOverflow { time, block }) => {
                return Ok(Verdict::Unknown(format!("divergence at t={time} (block {block})")));
            }
            Err(e) => return Err(e.into()),
        };
        if let Some(d) = dev {
            if worst.as_ref().is_none_or(|(_, w)| d.value > w.value) {
                worst = Some((i, d));
            }
        }
    }
    let eps_measured = worst.as_ref().map_or(0.0, |(_, d)| d.value);
    if eps_measured <= tube.epsilon {
        return Ok(Verdict::ApproxEquivalent {
            eps_measured,
            eps_bound: tube.pair_bound(),
        });
    }
    let (scenario, d) = worst.expect("a violation has a witness");
    Ok(Verdict::NotEquivalent(Counterexample::Trace(TraceCounterexample {
        scenario,
        step: d.step,
        time: d.time,
        signal: d.signal,
        value_a: d.a,
        value_b: d.b,
    })))
}
