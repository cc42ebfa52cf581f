//! Operational semantics: fixed-step output/update simulation loop.
//!
//! Each major step first evaluates every block in execution order (output
//! phase), records the Outport values, then advances the state of UnitDelay
//! and Integrator blocks (update phase).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{BlockKind, ModelClass, Sign};
use crate::rational::to_f64;
use crate::scenario::{InputSignal, Scenario};
use crate::validate::ValidatedModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[serde(rename = "euler")]
    ForwardEuler,
    Rk4,
}

impl Method {
    pub fn order(self) -> u32 {
        match self {
            Method::ForwardEuler => 1,
            Method::Rk4 => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::ForwardEuler => "euler",
            Method::Rk4 => "rk4",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euler" => Some(Method::ForwardEuler),
            "rk4" => Some(Method::Rk4),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: Method,
    pub h: f64,
    pub t0: f64,
    pub t_end: f64,
}

impl SolverConfig {
    pub fn new(method: Method, h: f64, t0: f64, t_end: f64) -> Result<Self, SimError> {
        if !(h.is_finite() && h > 0.0) {
            return Err(SimError::InvalidConfig(format!("step size must be positive, got {h}")));
        }
        if !(t0.is_finite() && t_end.is_finite() && t_end > t0) {
            return Err(SimError::InvalidConfig(format!(
                "end time {t_end} must exceed start time {t0}"
            )));
        }
        Ok(Self { method, h, t0, t_end })
    }

    /// Number of steps N; (T - t0)/h rounded up, ignoring float noise in the ratio.
    pub fn steps(&self) -> usize {
        let ratio = (self.t_end - self.t0) / self.h;
        let nearest = ratio.round();
        let n = if (ratio - nearest).abs() <= 1e-9 * ratio.max(1.0) {
            nearest
        } else {
            ratio.ceil()
        };
        n.max(0.0) as usize
    }

    /// t_k = t0 + k h, computed directly so long runs do not drift.
    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.h
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("{0} models are not supported")]
    Unsupported(ModelClass),
    #[error("non-finite value in block `{block}` at t={time}")]
    NumericOverflow { time: f64, block: String },
    #[error("no input generator for Inport `{0}`")]
    MissingInput(String),
    #[error("input generator for unknown Inport `{0}`")]
    UnknownInput(String),
    #[error("discrete model sample time {sample_time} differs from solver step {h}")]
    SampleTimeMismatch { sample_time: f64, h: f64 },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}

/// State of every UnitDelay and Integrator, plus the current major step.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub step: usize,
    pub values: BTreeMap<String, f64>,
}

impl SimState {
    pub fn initial(model: &ValidatedModel, cfg: &SolverConfig) -> Self {
        let values = model
            .stateful()
            .into_iter()
            .map(|i| (model.id(i).to_string(), initial_value(model.kind(i))))
            .collect();
        Self {
            t: cfg.t0,
            step: 0,
            values,
        }
    }
}

fn initial_value(kind: &BlockKind) -> f64 {
    match kind {
        BlockKind::UnitDelay { init } | BlockKind::Integrator { init } => to_f64(init),
        _ => 0.0,
    }
}

/// Which signals a trace records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Observe {
    #[default]
    Outports,
    /// Every block output (i.e. every wire), plus the Outports.
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub times: Vec<f64>,
    /// Sampled values keyed by signal name (Outport or block id).
    pub signals: BTreeMap<String, Vec<f64>>,
}

/// Largest pointwise deviation between two traces.
#[derive(Debug, Clone, PartialEq)]
pub struct Deviation {
    pub value: f64,
    pub time: f64,
    pub step: usize,
    pub signal: String,
    pub a: f64,
    pub b: f64,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn signal(&self, name: &str) -> Option<&[f64]> {
        self.signals.get(name).map(Vec::as_slice)
    }

    /// Sup-norm deviation over the signals both traces share; the first
    /// (earliest step, then smallest name) maximiser wins ties.
    pub fn max_deviation(&self, other: &Trace) -> Option<Deviation> {
        let mut worst: Option<Deviation> = None;
        let steps = self.len().min(other.len());
        for k in 0..steps {
            for (name, a) in &self.signals {
                let Some(b) = other.signals.get(name) else {
                    continue;
                };
                let d = (a[k] - b[k]).abs();
                if worst.as_ref().is_none_or(|w| d > w.value) {
                    worst = Some(Deviation {
                        value: d,
                        time: self.times[k],
                        step: k,
                        signal: name.clone(),
                        a: a[k],
                        b: b[k],
                    });
                }
            }
        }
        worst
    }

    /// CSV with header `t,<signal>,...`, 17 significant digits per value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for name in self.signals.keys() {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (k, t) in self.times.iter().enumerate() {
            let _ = write!(out, "{t:.16e}");
            for series in self.signals.values() {
                let _ = write!(out, ",{:.16e}", series[k]);
            }
            out.push('\n');
        }
        out
    }
}

pub(crate) fn euler_step(x: f64, h: f64, u: f64) -> f64 {
    x + h * u
}

/// Integrator state at an intermediate RK4 stage.
pub(crate) fn rk4_stage(x: f64, dt: f64, slope: f64) -> f64 {
    x + dt * slope
}

pub(crate) fn rk4_combine(x: f64, h: f64, k: [f64; 4]) -> f64 {
    x + h / 6.0 * (k[0] + 2.0 * k[1] + 2.0 * k[2] + k[3])
}

/// Looks up one generator per Inport of `model`, indexed by block.
pub(crate) fn bind_inputs<'s>(
    model: &ValidatedModel,
    scenario: &'s Scenario,
) -> Result<Vec<Option<&'s InputSignal>>, SimError> {
    let mut bound = vec![None; model.len()];
    for i in model.inports() {
        let signal = scenario
            .inputs
            .get(model.id(i))
            .ok_or_else(|| SimError::MissingInput(model.id(i).to_string()))?;
        bound[i] = Some(signal);
    }
    for name in scenario.inputs.keys() {
        let known = model
            .index_of(name)
            .is_some_and(|i| matches!(model.kind(i), BlockKind::Inport));
        if !known {
            return Err(SimError::UnknownInput(name.clone()));
        }
    }
    Ok(bound)
}

struct Engine<'a> {
    model: &'a ValidatedModel,
    inputs: Vec<Option<&'a InputSignal>>,
    /// Constant value or Gain factor per block, as f64.
    params: Vec<f64>,
    integrators: Vec<usize>,
    delays: Vec<usize>,
}

impl<'a> Engine<'a> {
    fn new(model: &'a ValidatedModel, scenario: &'a Scenario) -> Result<Self, SimError> {
        let params = (0..model.len())
            .map(|i| match model.kind(i) {
                BlockKind::Constant { value } => to_f64(value),
                BlockKind::Gain { k } => to_f64(k),
                _ => 0.0,
            })
            .collect();
        Ok(Self {
            model,
            inputs: bind_inputs(model, scenario)?,
            params,
            integrators: model.blocks_where(|k| matches!(k, BlockKind::Integrator { .. })),
            delays: model.blocks_where(|k| matches!(k, BlockKind::UnitDelay { .. })),
        })
    }

    fn initial_state(&self) -> Vec<f64> {
        (0..self.model.len())
            .map(|i| initial_value(self.model.kind(i)))
            .collect()
    }

    /// Fills `out[b]` with the output of block b (the input value for Outports).
    fn outputs(&self, state: &[f64], t: f64, step: usize, out: &mut [f64]) -> Result<(), SimError> {
        for &b in self.model.order() {
            let d = self.model.drivers(b);
            let v = match self.model.kind(b) {
                BlockKind::Inport => self.inputs[b].map_or(0.0, |s| s.sample(t, step)),
                BlockKind::Outport => out[d[0]],
                BlockKind::Constant { .. } => self.params[b],
                BlockKind::Clock => t,
                BlockKind::Gain { .. } => self.params[b] * out[d[0]],
                BlockKind::Sum { signs } => {
                    let mut acc = match signs[0] {
                        Sign::Plus => out[d[0]],
                        Sign::Minus => -out[d[0]],
                    };
                    for (sign, &src) in signs.iter().zip(d).skip(1) {
                        acc = match sign {
                            Sign::Plus => acc + out[src],
                            Sign::Minus => acc - out[src],
                        };
                    }
                    acc
                }
                BlockKind::Product { .. } => d[1..].iter().fold(out[d[0]], |acc, &src| acc * out[src]),
                BlockKind::UnaryFn { op } => op.apply_f64(out[d[0]]),
                BlockKind::UnitDelay { .. } | BlockKind::Integrator { .. } => state[b],
            };
            if !v.is_finite() {
                return Err(SimError::NumericOverflow {
                    time: t,
                    block: self.model.id(b).to_string(),
                });
            }
            out[b] = v;
        }
        Ok(())
    }

    /// Advances `state` in place given the outputs at the start of the step.
    fn update(&self, state: &mut [f64], out: &[f64], cfg: &SolverConfig, t: f64, step: usize) -> Result<(), SimError> {
        for &b in &self.delays {
            state[b] = out[self.model.drivers(b)[0]];
        }
        if self.integrators.is_empty() {
            return Ok(());
        }
        let h = cfg.h;
        let input = |outputs: &[f64], b: usize| outputs[self.model.drivers(b)[0]];
        match cfg.method {
            Method::ForwardEuler => {
                for &b in &self.integrators {
                    state[b] = euler_step(state[b], h, input(out, b));
                }
            }
            Method::Rk4 => {
                let n = self.integrators.len();
                let mut slopes = vec![[0.0; 4]; n];
                for (j, &b) in self.integrators.iter().enumerate() {
                    slopes[j][0] = input(out, b);
                }
                let mut stage_state = state.to_vec();
                let mut stage_out = vec![0.0; out.len()];
                let stages = [(0.5 * h, t + 0.5 * h), (0.5 * h, t + 0.5 * h), (h, t + h)];
                for (s, &(dt, ts)) in stages.iter().enumerate() {
                    for (j, &b) in self.integrators.iter().enumerate() {
                        stage_state[b] = rk4_stage(state[b], dt, slopes[j][s]);
                    }
                    self.outputs(&stage_state, ts, step, &mut stage_out)?;
                    for (j, &b) in self.integrators.iter().enumerate() {
                        slopes[j][s + 1] = input(&stage_out, b);
                    }
                }
                for (j, &b) in self.integrators.iter().enumerate() {
                    state[b] = rk4_combine(state[b], h, slopes[j]);
                }
            }
        }
        for &b in &self.integrators {
            if !state[b].is_finite() {
                return Err(SimError::NumericOverflow {
                    time: t + h,
                    block: self.model.id(b).to_string(),
                });
            }
        }
        Ok(())
    }

    fn state_vec(&self, state: &SimState) -> Vec<f64> {
        let mut v = self.initial_state();
        for (id, value) in &state.values {
            if let Some(i) = self.model.index_of(id) {
                v[i] = *value;
            }
        }
        v
    }
}

fn check_class(model: &ValidatedModel) -> Result<(), SimError> {
    match model.class() {
        ModelClass::Hybrid => Err(SimError::Unsupported(ModelClass::Hybrid)),
        _ => Ok(()),
    }
}

/// Evaluates all blocks at time `t` (within major step `state.step`) and
/// returns every signal keyed by block id.
pub fn output_phase(
    model: &ValidatedModel,
    state: &SimState,
    scenario: &Scenario,
    t: f64,
) -> Result<BTreeMap<String, f64>, SimError> {
    let engine = Engine::new(model, scenario)?;
    let mut out = vec![0.0; model.len()];
    engine.outputs(&engine.state_vec(state), t, state.step, &mut out)?;
    Ok((0..model.len()).map(|i| (model.id(i).to_string(), out[i])).collect())
}

/// Advances the state by one major step from the signals `outputs`
/// computed by [`output_phase`] at `state.t`.
pub fn update_phase(
    model: &ValidatedModel,
    state: &SimState,
    outputs: &BTreeMap<String, f64>,
    scenario: &Scenario,
    cfg: &SolverConfig,
) -> Result<SimState, SimError> {
    let engine = Engine::new(model, scenario)?;
    let mut vec_state = engine.state_vec(state);
    let out: Vec<f64> = (0..model.len())
        .map(|i| outputs.get(model.id(i)).copied().unwrap_or(0.0))
        .collect();
    engine.update(&mut vec_state, &out, cfg, state.t, state.step)?;
    let step = state.step + 1;
    Ok(SimState {
        t: cfg.time(step),
        step,
        values: state
            .values
            .keys()
            .map(|id| (id.clone(), vec_state[model.index_of(id).unwrap()]))
            .collect(),
    })
}

pub(crate) fn check_sample_time(model: &ValidatedModel, cfg: &SolverConfig) -> Result<(), SimError> {
    if model.class() == ModelClass::Discrete {
        let st = to_f64(&model.model().sample_time);
        if (st - cfg.h).abs() > 1e-12 * st {
            return Err(SimError::SampleTimeMismatch {
                sample_time: st,
                h: cfg.h,
            });
        }
    }
    Ok(())
}

pub fn simulate(model: &ValidatedModel, scenario: &Scenario, cfg: &SolverConfig) -> Result<Trace, SimError> {
    simulate_observing(model, scenario, cfg, Observe::Outports)
}

pub fn simulate_observing(
    model: &ValidatedModel,
    scenario: &Scenario,
    cfg: &SolverConfig,
    observe: Observe,
) -> Result<Trace, SimError> {
    check_class(model)?;
    check_sample_time(model, cfg)?;
    let engine = Engine::new(model, scenario)?;
    let n = cfg.steps();
    let observed: Vec<usize> = match observe {
        Observe::Outports => model.outports(),
        Observe::All => model.blocks_where(|_| true),
    };
    let mut series: Vec<Vec<f64>> = vec![Vec::with_capacity(n + 1); observed.len()];
    let mut times = Vec::with_capacity(n + 1);
    let mut state = engine.initial_state();
    let mut out = vec![0.0; model.len()];
    for k in 0..=n {
        let t = cfg.time(k);
        engine.outputs(&state, t, k, &mut out)?;
        times.push(t);
        for (s, &b) in series.iter_mut().zip(&observed) {
            s.push(out[b]);
        }
        if k < n {
            engine.update(&mut state, &out, cfg, t, k)?;
        }
    }
    Ok(Trace {
        times,
        signals: observed.iter().map(|&b| model.id(b).to_string()).zip(series).collect(),
    })
}
