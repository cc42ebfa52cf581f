//! Input generators that drive Inports during simulation.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Default seed for noise inputs and counterexample search.
pub const DEFAULT_SEED: u64 = 0xC0FFEE;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InputSignal {
    Constant {
        value: f64,
    },
    /// `before` while t < t_step, `after` from t_step on.
    Step {
        t_step: f64,
        before: f64,
        after: f64,
    },
    Sine {
        amplitude: f64,
        angular_frequency: f64,
        phase: f64,
    },
    /// Uniform in [-amplitude, amplitude], held constant over each major step.
    Noise {
        seed: u64,
        amplitude: f64,
    },
}

impl InputSignal {
    pub fn default_noise() -> Self {
        InputSignal::Noise {
            seed: DEFAULT_SEED,
            amplitude: 1.0,
        }
    }

    /// Value at time `t`, which lies within major step `step`.
    pub fn sample(&self, t: f64, step: usize) -> f64 {
        match *self {
            InputSignal::Constant { value } => value,
            InputSignal::Step { t_step, before, after } => {
                if t < t_step {
                    before
                } else {
                    after
                }
            }
            InputSignal::Sine {
                amplitude,
                angular_frequency,
                phase,
            } => amplitude * (angular_frequency * t + phase).sin(),
            InputSignal::Noise { seed, amplitude } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(step as u64);
                amplitude * rng.gen_range(-1.0..=1.0)
            }
        }
    }
}

impl fmt::Display for InputSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputSignal::Constant { value } => write!(f, "const:{value}"),
            InputSignal::Step { t_step, before, after } => write!(f, "step:{t_step},{before},{after}"),
            InputSignal::Sine {
                amplitude,
                angular_frequency,
                phase,
            } => write!(f, "sine:{amplitude},{angular_frequency},{phase}"),
            InputSignal::Noise { seed, amplitude } => write!(f, "noise:{seed},{amplitude}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid input generator `{0}` (expected const:C, step:T,B,A, sine:A,W,P or noise:SEED,A)")]
pub struct InputSpecError(pub String);

/// Parses `const:C`, `step:T,B,A`, `sine:A,W,P` or `noise:SEED,A`.
impl FromStr for InputSignal {
    type Err = InputSpecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || InputSpecError(s.to_string());
        let (kind, args) = s.split_once(':').ok_or_else(err)?;
        let args: Vec<&str> = args.split(',').map(str::trim).collect();
        let reals = |n: usize| -> Result<Vec<f64>, InputSpecError> {
            if args.len() != n {
                return Err(err());
            }
            args.iter()
                .map(|a| a.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(err))
                .collect()
        };
        Ok(match kind {
            "const" => InputSignal::Constant { value: reals(1)?[0] },
            "step" => {
                let v = reals(3)?;
                InputSignal::Step {
                    t_step: v[0],
                    before: v[1],
                    after: v[2],
                }
            }
            "sine" => {
                let v = reals(3)?;
                InputSignal::Sine {
                    amplitude: v[0],
                    angular_frequency: v[1],
                    phase: v[2],
                }
            }
            "noise" => {
                if args.len() != 2 {
                    return Err(err());
                }
                InputSignal::Noise {
                    seed: parse_seed(args[0]).ok_or_else(err)?,
                    amplitude: args[1].parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(err)?,
                }
            }
            _ => return Err(err()),
        })
    }
}

/// Decimal or `0x`-prefixed hexadecimal u64.
pub fn parse_seed(s: &str) -> Option<u64> {
    let s = s.trim();
    match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16).ok(),
        None => s.parse().ok(),
    }
}

/// One input generator per Inport, keyed by Inport block id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub inputs: BTreeMap<String, InputSignal>,
}

impl Scenario {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, inport: impl Into<String>, signal: InputSignal) -> Self {
        self.inputs.insert(inport.into(), signal);
        self
    }

    /// Fills every listed Inport that has no generator with the default noise.
    pub fn fill_defaults<S: AsRef<str>>(mut self, inports: &[S]) -> Self {
        for name in inports {
            self.inputs
                .entry(name.as_ref().to_string())
                .or_insert_with(InputSignal::default_noise);
        }
        self
    }
}
