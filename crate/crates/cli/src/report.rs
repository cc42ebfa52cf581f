//! JSON check reports. The schema lives in `docs/report.schema.json`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use refcheck_core::equiv::TraceCounterexample;
use refcheck_core::rational::format_exact;
use refcheck_core::search::{SymbolicCounterexample, TIME_VAR};
use refcheck_core::{Counterexample, ModelClass, SearchConfig, SolverConfig, Verdict};

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub name: String,
    pub path: String,
    pub class: ModelClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VerdictReport {
    ExactEquivalent,
    ApproxEquivalent,
    NotEquivalent,
    Unknown { reason: String },
    Unsupported { reason: String },
}

/// Exact values are written as decimals or `p/q`, approximate ones in
/// scientific notation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CounterexampleReport {
    Symbolic {
        output: String,
        step: usize,
        /// Input sequences, one value per step.
        inputs: BTreeMap<String, Vec<String>>,
        times: Vec<String>,
        value_a: String,
        value_b: String,
    },
    Trace {
        scenario: usize,
        step: usize,
        time: f64,
        signal: String,
        value_a: f64,
        value_b: f64,
    },
}

impl From<&SymbolicCounterexample> for CounterexampleReport {
    fn from(cx: &SymbolicCounterexample) -> Self {
        CounterexampleReport::Symbolic {
            output: cx.output.clone(),
            step: cx.step,
            inputs: cx
                .env
                .inputs
                .iter()
                .map(|(k, v)| (k.clone(), v.iter().map(format_exact).collect()))
                .collect(),
            times: cx.env.times.iter().map(format_exact).collect(),
            value_a: cx.value_a.to_string(),
            value_b: cx.value_b.to_string(),
        }
    }
}

impl From<&TraceCounterexample> for CounterexampleReport {
    fn from(cx: &TraceCounterexample) -> Self {
        CounterexampleReport::Trace {
            scenario: cx.scenario,
            step: cx.step,
            time: cx.time,
            signal: cx.signal.clone(),
            value_a: cx.value_a,
            value_b: cx.value_b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub method: String,
    pub h: f64,
    pub t0: f64,
    pub t_end: f64,
}

impl From<&SolverConfig> for SolverReport {
    fn from(c: &SolverConfig) -> Self {
        SolverReport {
            method: c.method.name().to_string(),
            h: c.h,
            t0: c.t0,
            t_end: c.t_end,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub seed: u64,
    pub budget: usize,
}

impl From<&SearchConfig> for SearchReport {
    fn from(s: &SearchConfig) -> Self {
        SearchReport {
            seed: s.seed,
            budget: s.budget,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquationsReport {
    pub a: Vec<String>,
    pub b: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub report_version: u32,
    pub tool_version: String,
    pub model_a: ModelInfo,
    pub model_b: ModelInfo,
    pub verdict: VerdictReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_measured: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<CounterexampleReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverReport>,
    pub search: SearchReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equations: Option<EquationsReport>,
    pub timing_ms: u64,
}

impl CheckReport {
    /// Fills the verdict fields; everything else starts empty.
    pub fn new(model_a: ModelInfo, model_b: ModelInfo, verdict: &Verdict, search: &SearchConfig) -> Self {
        let mut report = CheckReport {
            report_version: REPORT_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            model_a,
            model_b,
            verdict: VerdictReport::ExactEquivalent,
            epsilon: None,
            eps_measured: None,
            eps_bound: None,
            counterexample: None,
            solver: None,
            search: search.into(),
            equations: None,
            timing_ms: 0,
        };
        report.verdict = match verdict {
            Verdict::ExactEquivalent => VerdictReport::ExactEquivalent,
            Verdict::ApproxEquivalent {
                eps_measured,
                eps_bound,
            } => {
                report.eps_measured = Some(*eps_measured);
                report.eps_bound = *eps_bound;
                VerdictReport::ApproxEquivalent
            }
            Verdict::NotEquivalent(cx) => {
                report.counterexample = Some(match cx {
                    Counterexample::Symbolic(s) => s.into(),
                    Counterexample::Trace(t) => {
                        report.eps_measured = Some((t.value_a - t.value_b).abs());
                        t.into()
                    }
                });
                VerdictReport::NotEquivalent
            }
            Verdict::Unknown(reason) => VerdictReport::Unknown { reason: reason.clone() },
            Verdict::Unsupported(reason) => VerdictReport::Unsupported { reason: reason.clone() },
        };
        report
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }
}

/// One-line summary of a counterexample for the text report.
pub fn describe(cx: &CounterexampleReport) -> String {
    match cx {
        CounterexampleReport::Symbolic {
            output,
            step,
            inputs,
            times,
            value_a,
            value_b,
        } => {
            let mut at: Vec<String> = inputs
                .iter()
                .map(|(name, seq)| {
                    if seq.len() == 1 {
                        format!("{name} = {}", seq[0])
                    } else {
                        format!("{name} = [{}]", seq.join(", "))
                    }
                })
                .collect();
            if times.len() == 1 {
                at.push(format!("{TIME_VAR} = {}", times[0]));
            }
            let point = if at.is_empty() { "no inputs".to_string() } else { at.join(", ") };
            format!("{output} at step {step} with {point}: A = {value_a}, B = {value_b}")
        }
        CounterexampleReport::Trace {
            scenario,
            step,
            time,
            signal,
            value_a,
            value_b,
        } => format!(
            "{signal} at t = {time} (step {step}, scenario {scenario}): A = {value_a:e}, B = {value_b:e}, |A - B| = {:e}",
            (value_a - value_b).abs()
        ),
    }
}
