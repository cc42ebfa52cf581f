//! Random valid models, scenarios and expressions for property tests.
//!
//! Discrete models are feed-forward (no delay on a cycle), so they always
//! have closed equations. In continuous models, Products never take a
//! state-dependent input; the vector field is then globally Lipschitz and
//! trajectories stay finite on short horizons.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::expr::SignalExpr;
use crate::model::{BlockKind, Model, ModelClass, Sign, UnaryOp};
use crate::rational::{int, ratio, Rational};
use crate::scenario::{InputSignal, Scenario};

pub const MAX_BLOCKS: usize = 12;

/// Small rational with denominator from {1, 2, 3, 4, 5, 8, 10}.
pub fn small_rational(rng: &mut impl Rng, max_abs: i64) -> Rational {
    let den = *[1, 2, 3, 4, 5, 8, 10].choose(rng).unwrap();
    ratio(rng.gen_range(-max_abs * den..=max_abs * den), den)
}

struct Source {
    id: String,
    state_dependent: bool,
}

/// A valid model of the requested class with at most [`MAX_BLOCKS`] blocks.
pub fn random_model(rng: &mut impl Rng, class: ModelClass, name: &str) -> Model {
    let mut m = Model::new(name);
    let mut sources: Vec<Source> = Vec::new();
    let with_delays = matches!(class, ModelClass::Discrete | ModelClass::Hybrid);
    let with_integrators = matches!(class, ModelClass::Continuous | ModelClass::Hybrid);
    if with_delays {
        m.sample_time = [int(1), ratio(1, 2), ratio(1, 4), ratio(1, 10)]
            .choose(rng)
            .unwrap()
            .clone();
    }

    let outports = rng.gen_range(1..=2);
    for i in 0..rng.gen_range(0..=2) {
        let id = format!("u{i}");
        m.add_block(&id, BlockKind::Inport);
        sources.push(Source {
            id,
            state_dependent: false,
        });
    }
    if sources.is_empty() {
        m.add_block(
            "c",
            BlockKind::Constant {
                value: small_rational(rng, 3),
            },
        );
        sources.push(Source {
            id: "c".into(),
            state_dependent: false,
        });
    }
    let mut integrators = Vec::new();
    if with_integrators {
        for i in 0..rng.gen_range(1..=2) {
            let id = format!("x{i}");
            m.add_block(
                &id,
                BlockKind::Integrator {
                    init: small_rational(rng, 1),
                },
            );
            sources.push(Source {
                id: id.clone(),
                state_dependent: true,
            });
            integrators.push(id);
        }
    }

    let room = MAX_BLOCKS - m.blocks.len() - outports;
    let ops = rng.gen_range(usize::from(with_delays)..=room);
    for i in 0..ops {
        let id = format!("b{i}");
        let kind = loop {
            let pick = rng.gen_range(0..if with_delays { 8 } else { 7 });
            let kind = match pick {
                0 => BlockKind::Constant {
                    value: small_rational(rng, 3),
                },
                1 => BlockKind::Clock,
                2 => BlockKind::Gain {
                    k: small_rational(rng, 2),
                },
                3 => BlockKind::Sum {
                    signs: (0..rng.gen_range(2..=3))
                        .map(|_| if rng.gen_bool(0.5) { Sign::Plus } else { Sign::Minus })
                        .collect(),
                },
                4 => BlockKind::Product {
                    arity: rng.gen_range(2..=3),
                },
                5 | 6 => BlockKind::UnaryFn {
                    op: *UnaryOp::ALL.choose(rng).unwrap(),
                },
                _ => BlockKind::UnitDelay {
                    init: small_rational(rng, 3),
                },
            };
            // at least one delay in discrete models
            if with_delays && i == 0 && !matches!(kind, BlockKind::UnitDelay { .. }) {
                continue;
            }
            break kind;
        };
        let candidates: Vec<usize> = match kind {
            BlockKind::Product { .. } if with_integrators => {
                (0..sources.len()).filter(|&s| !sources[s].state_dependent).collect()
            }
            _ => (0..sources.len()).collect(),
        };
        let arity = kind.input_arity();
        let mut state_dependent = false;
        m.add_block(&id, kind);
        for port in 0..arity {
            // favour recent sources so chains get deep
            let s = if rng.gen_bool(0.6) {
                candidates[candidates.len() - 1 - rng.gen_range(0..candidates.len().min(2))]
            } else {
                *candidates.choose(rng).unwrap()
            };
            state_dependent |= sources[s].state_dependent;
            let src = sources[s].id.clone();
            m.connect(&src, &id, port);
        }
        sources.push(Source { id, state_dependent });
    }

    for x in &integrators {
        let src = sources.choose(rng).unwrap().id.clone();
        m.connect(&src, x, 0);
    }
    for i in 0..outports {
        let id = format!("y{i}");
        let src = if i == 0 {
            sources.last().unwrap().id.clone()
        } else {
            sources.choose(rng).unwrap().id.clone()
        };
        m.add_block(&id, BlockKind::Outport);
        m.connect(&src, &id, 0);
    }
    m.blocks.shuffle(rng);
    m.wires.shuffle(rng);
    m
}

pub fn random_signal(rng: &mut impl Rng) -> InputSignal {
    match rng.gen_range(0..4) {
        0 => InputSignal::Constant {
            value: rng.gen_range(-2.0..2.0),
        },
        1 => InputSignal::Step {
            t_step: rng.gen_range(0.0..1.0),
            before: rng.gen_range(-2.0..2.0),
            after: rng.gen_range(-2.0..2.0),
        },
        2 => InputSignal::Sine {
            amplitude: rng.gen_range(0.1..2.0),
            angular_frequency: rng.gen_range(0.5..10.0),
            phase: rng.gen_range(0.0..std::f64::consts::TAU),
        },
        _ => InputSignal::Noise {
            seed: rng.gen(),
            amplitude: rng.gen_range(0.1..2.0),
        },
    }
}

/// One random signal per inport name.
pub fn random_scenario<S: AsRef<str>>(rng: &mut impl Rng, inports: &[S]) -> Scenario {
    inports
        .iter()
        .fold(Scenario::new(), |s, name| s.with(name.as_ref(), random_signal(rng)))
}

/// Random expression over `vars` and time, of nesting depth at most `depth`.
pub fn random_expr<S: AsRef<str>>(rng: &mut impl Rng, vars: &[S], depth: usize) -> SignalExpr {
    let leaf = depth == 0 || rng.gen_bool(0.25);
    if leaf {
        return match rng.gen_range(0..6) {
            0 => SignalExpr::Time,
            1 | 2 => SignalExpr::Rat(small_rational(rng, 3)),
            _ => SignalExpr::var(vars.choose(rng).map_or("u", |v| v.as_ref())),
        };
    }
    let n = rng.gen_range(1..=3);
    match rng.gen_range(0..5) {
        0 => SignalExpr::Add((0..n).map(|_| random_expr(rng, vars, depth - 1)).collect()),
        1 => SignalExpr::Mul((0..n).map(|_| random_expr(rng, vars, depth - 1)).collect()),
        2 => SignalExpr::apply(*UnaryOp::ALL.choose(rng).unwrap(), random_expr(rng, vars, depth - 1)),
        3 => {
            let d = rng.gen_range(1..=3);
            let inits = (0..d).map(|_| small_rational(rng, 3)).collect();
            SignalExpr::shift(random_expr(rng, vars, depth - 1), d, inits)
        }
        _ => SignalExpr::Mul(vec![
            SignalExpr::Rat(small_rational(rng, 3)),
            random_expr(rng, vars, depth - 1),
        ]),
    }
}
