//! Evaluates an equation system on the simulator's time grid.
//!
//! This is the executable link between the equations and the operational
//! semantics: for every model, `eval_equations(extract(m))` must reproduce
//! `simulate(m)`. Floating-point operations are performed in the same order
//! as the simulator, so unsampled and discrete traces agree bit for bit.

use std::collections::BTreeMap;

use crate::expr::SignalExpr;
use crate::extract::EquationSystem;
use crate::model::{ModelClass, UnaryOp};
use crate::rational::to_f64;
use crate::scenario::{InputSignal, Scenario};
use crate::sim::{euler_step, rk4_combine, rk4_stage, Method, SimError, SolverConfig, Trace};

#[derive(Debug, Clone)]
enum Node {
    Input(usize),
    Time,
    Const(f64),
    State(usize),
    Add(Vec<usize>),
    Mul(Vec<usize>),
    Apply(UnaryOp, usize),
    Shift {
        arg: usize,
        depth: usize,
        inits: Vec<f64>,
        history: usize,
    },
}

/// Expression trees flattened into a post-order arena.
struct Program {
    nodes: Vec<Node>,
    histories: usize,
}

struct Compiler<'a> {
    inputs: &'a BTreeMap<String, usize>,
    states: &'a BTreeMap<String, usize>,
    program: Program,
}

impl Compiler<'_> {
    fn push(&mut self, node: Node) -> usize {
        self.program.nodes.push(node);
        self.program.nodes.len() - 1
    }

    fn compile(&mut self, e: &SignalExpr) -> usize {
        let node = match e {
            SignalExpr::Var(name) => Node::Input(self.inputs[name]),
            SignalExpr::Time => Node::Time,
            SignalExpr::Rat(r) => Node::Const(to_f64(r)),
            SignalExpr::IntState(id) => Node::State(self.states[id]),
            SignalExpr::Add(xs) => Node::Add(xs.iter().map(|x| self.compile(x)).collect()),
            SignalExpr::Mul(xs) => Node::Mul(xs.iter().map(|x| self.compile(x)).collect()),
            SignalExpr::Apply(op, x) => Node::Apply(*op, self.compile(x)),
            SignalExpr::Shift { arg, depth, inits } => {
                let arg = self.compile(arg);
                let history = self.program.histories;
                self.program.histories += 1;
                Node::Shift {
                    arg,
                    depth: *depth,
                    inits: inits.iter().map(to_f64).collect(),
                    history,
                }
            }
        };
        self.push(node)
    }
}

struct Frame<'a> {
    inputs: &'a [&'a InputSignal],
    states: &'a [f64],
    t: f64,
    step: usize,
}

impl Program {
    /// Evaluates every node; Shift histories are extended only when `record`.
    fn run(
        &self,
        frame: &Frame<'_>,
        values: &mut [f64],
        histories: &mut [Vec<f64>],
        record: bool,
    ) -> Result<(), SimError> {
        for (i, node) in self.nodes.iter().enumerate() {
            let v = match node {
                Node::Input(slot) => frame.inputs[*slot].sample(frame.t, frame.step),
                Node::Time => frame.t,
                Node::Const(c) => *c,
                Node::State(slot) => frame.states[*slot],
                Node::Add(xs) => xs[1..].iter().fold(values[xs[0]], |acc, &x| acc + values[x]),
                Node::Mul(xs) => xs[1..].iter().fold(values[xs[0]], |acc, &x| acc * values[x]),
                Node::Apply(op, x) => op.apply_f64(values[*x]),
                Node::Shift {
                    arg,
                    depth,
                    inits,
                    history,
                } => {
                    let hist = &mut histories[*history];
                    if record {
                        hist.push(values[*arg]);
                    }
                    if frame.step < *depth {
                        inits[frame.step]
                    } else {
                        hist[frame.step - depth]
                    }
                }
            };
            if !v.is_finite() {
                return Err(SimError::NumericOverflow {
                    time: frame.t,
                    block: "<equation>".into(),
                });
            }
            values[i] = v;
        }
        Ok(())
    }
}

/// Runs the equation system over the grid of `cfg`, recording every output.
pub fn eval_equations(eqs: &EquationSystem, scenario: &Scenario, cfg: &SolverConfig) -> Result<Trace, SimError> {
    match eqs.class {
        ModelClass::Hybrid => return Err(SimError::Unsupported(ModelClass::Hybrid)),
        ModelClass::Discrete => {
            let st = to_f64(&eqs.sample_time);
            if (st - cfg.h).abs() > 1e-12 * st {
                return Err(SimError::SampleTimeMismatch {
                    sample_time: st,
                    h: cfg.h,
                });
            }
        }
        _ => {}
    }
    let mut bound = Vec::with_capacity(eqs.inputs.len());
    for name in &eqs.inputs {
        bound.push(
            scenario
                .inputs
                .get(name)
                .ok_or_else(|| SimError::MissingInput(name.clone()))?,
        );
    }
    if let Some(extra) = scenario.inputs.keys().find(|k| !eqs.inputs.contains(k)) {
        return Err(SimError::UnknownInput(extra.clone()));
    }
    let input_slots: BTreeMap<String, usize> = eqs.inputs.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
    let state_slots: BTreeMap<String, usize> = eqs.state_defs.keys().enumerate().map(|(i, n)| (n.clone(), i)).collect();
    let mut compiler = Compiler {
        inputs: &input_slots,
        states: &state_slots,
        program: Program {
            nodes: Vec::new(),
            histories: 0,
        },
    };
    let outputs: Vec<(String, usize)> = eqs
        .outputs
        .iter()
        .map(|(name, e)| (name.clone(), compiler.compile(e)))
        .collect();
    let derivatives: Vec<usize> = eqs
        .state_defs
        .values()
        .map(|d| compiler.compile(&d.derivative))
        .collect();
    let program = compiler.program;

    let n = cfg.steps();
    let h = cfg.h;
    let mut states: Vec<f64> = eqs.state_defs.values().map(|d| to_f64(&d.init)).collect();
    let mut values = vec![0.0; program.nodes.len()];
    let mut stage_values = vec![0.0; program.nodes.len()];
    let mut histories = vec![Vec::with_capacity(n + 1); program.histories];
    let mut series = vec![Vec::with_capacity(n + 1); outputs.len()];
    let mut times = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let t = cfg.time(k);
        let frame = Frame {
            inputs: &bound,
            states: &states,
            t,
            step: k,
        };
        program.run(&frame, &mut values, &mut histories, true)?;
        times.push(t);
        for (s, (_, node)) in series.iter_mut().zip(&outputs) {
            s.push(values[*node]);
        }
        if k == n || states.is_empty() {
            continue;
        }
        let next: Vec<f64> = match cfg.method {
            Method::ForwardEuler => states
                .iter()
                .zip(&derivatives)
                .map(|(&x, &d)| euler_step(x, h, values[d]))
                .collect(),
            Method::Rk4 => {
                let mut slopes: Vec<[f64; 4]> = derivatives.iter().map(|&d| [values[d], 0.0, 0.0, 0.0]).collect();
                let stages = [(0.5 * h, t + 0.5 * h), (0.5 * h, t + 0.5 * h), (h, t + h)];
                for (s, &(dt, ts)) in stages.iter().enumerate() {
                    let stage_states: Vec<f64> = states
                        .iter()
                        .zip(&slopes)
                        .map(|(&x, k)| rk4_stage(x, dt, k[s]))
                        .collect();
                    let frame = Frame {
                        inputs: &bound,
                        states: &stage_states,
                        t: ts,
                        step: k,
                    };
                    program.run(&frame, &mut stage_values, &mut histories, false)?;
                    for (slope, &d) in slopes.iter_mut().zip(&derivatives) {
                        slope[s + 1] = stage_values[d];
                    }
                }
                states
                    .iter()
                    .zip(&slopes)
                    .map(|(&x, &k)| rk4_combine(x, h, k))
                    .collect()
            }
        };
        if next.iter().any(|x| !x.is_finite()) {
            return Err(SimError::NumericOverflow {
                time: t + h,
                block: "<equation>".into(),
            });
        }
        states = next;
    }
    Ok(Trace {
        times,
        signals: outputs.into_iter().map(|(name, _)| name).zip(series).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::extract;
    use crate::parser::parse_bdl;
    use crate::sim::simulate;
    use crate::validate::validate;

    fn both(text: &str, scenario: &Scenario, cfg: &SolverConfig) -> (Trace, Trace) {
        let m = validate(parse_bdl(text).unwrap()).unwrap();
        let eqs = extract(&m).unwrap();
        (
            simulate(&m, scenario, cfg).unwrap(),
            eval_equations(&eqs, scenario, cfg).unwrap(),
        )
    }

    #[test]
    fn shift_prefix_then_delayed_samples() {
        let text = "model m\nblock u Inport\nblock a UnitDelay init=8\nblock b UnitDelay init=7\n\
             block y Outport\nwire u.0 -> a.0\nwire a.0 -> b.0\nwire b.0 -> y.0";
        let sc = Scenario::new().with(
            "u",
            InputSignal::Step {
                t_step: 1.0,
                before: 3.0,
                after: 4.0,
            },
        );
        let cfg = SolverConfig::new(Method::Rk4, 1.0, 0.0, 4.0).unwrap();
        let (sim, eq) = both(text, &sc, &cfg);
        assert_eq!(eq.signal("y").unwrap(), [7.0, 8.0, 3.0, 4.0, 4.0]);
        assert_eq!(sim, eq);
    }

    #[test]
    fn harmonic_oscillator_matches_simulation() {
        let text = "model osc\nblock v Integrator init=1\nblock x Integrator init=0\n\
             block g Gain k=-1\nblock y Outport\nwire v.0 -> x.0\nwire x.0 -> g.0\n\
             wire g.0 -> v.0\nwire x.0 -> y.0";
        let cfg = SolverConfig::new(Method::Rk4, 1e-3, 0.0, 10.0).unwrap();
        let (sim, eq) = both(text, &Scenario::new(), &cfg);
        let dev = sim.max_deviation(&eq).unwrap();
        assert!(dev.value <= 1e-12, "{dev:?}");
    }

    #[test]
    fn unsampled_is_bit_identical() {
        let text = "model m\nblock a Inport\nblock b Inport\nblock s Sum signs=-+-\nblock c Constant value=0.1\n\
             block p Product arity=2\nblock f UnaryFn op=sin\nblock k Clock\nblock y Outport\n\
             wire a.0 -> s.0\nwire b.0 -> s.1\nwire k.0 -> s.2\nwire s.0 -> p.0\nwire c.0 -> p.1\n\
             wire p.0 -> f.0\nwire f.0 -> y.0";
        let sc = Scenario::new().with("a", InputSignal::default_noise()).with(
            "b",
            InputSignal::Sine {
                amplitude: 2.0,
                angular_frequency: 3.0,
                phase: 0.1,
            },
        );
        let cfg = SolverConfig::new(Method::ForwardEuler, 0.01, 0.0, 1.0).unwrap();
        let (sim, eq) = both(text, &sc, &cfg);
        assert_eq!(sim, eq);
    }
}
