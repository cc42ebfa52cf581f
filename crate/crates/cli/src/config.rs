//! Optional TOML settings for `check` and `simulate`; command-line flags win.
//!
//! ```toml
//! epsilon = 1e-5
//! method = "rk4"
//! h = 1e-3
//! t_end = 10.0
//!
//! [inputs]
//! u = "sine:1,2,0"
//!
//! [[scenarios]]
//! u = "step:0.5,0,1"
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Deserialize;

use refcheck_core::scenario::InputSignal;
use refcheck_core::{Method, Scenario};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub epsilon: Option<f64>,
    pub method: Option<String>,
    pub h: Option<f64>,
    pub t0: Option<f64>,
    pub t_end: Option<f64>,
    pub lipschitz: Option<f64>,
    pub deriv_bound: Option<f64>,
    pub seed: Option<u64>,
    pub budget: Option<usize>,
    /// Inport name to input spec, shared by every scenario.
    #[serde(default)]
    pub inputs: BTreeMap<String, String>,
    #[serde(default)]
    pub scenarios: Vec<BTreeMap<String, String>>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn method(&self) -> Result<Option<Method>, CliError> {
        self.method
            .as_deref()
            .map(|m| parse_method(m).map_err(CliError::Config))
            .transpose()
    }
}

pub fn parse_method(s: &str) -> Result<Method, String> {
    Method::from_name(s).ok_or_else(|| format!("unknown method `{s}` (expected euler or rk4)"))
}

/// Splits `NAME=SPEC` and parses the generator.
pub fn parse_input(arg: &str) -> Result<(String, InputSignal), String> {
    let (name, spec) = arg
        .split_once('=')
        .ok_or_else(|| format!("expected NAME=SPEC, got `{arg}`"))?;
    let signal = spec
        .parse::<InputSignal>()
        .map_err(|e| format!("input `{name}`: {e}"))?;
    Ok((name.to_string(), signal))
}

fn parse_table(table: &BTreeMap<String, String>) -> Result<BTreeMap<String, InputSignal>, CliError> {
    table
        .iter()
        .map(|(name, spec)| parse_input(&format!("{name}={spec}")).map_err(CliError::Config))
        .collect()
}

/// Scenarios from config and flags: the `[inputs]` table overridden by
/// `--input` flags forms a base; each `[[scenarios]]` entry is laid over the
/// base. Without scenario entries the base alone is the only scenario.
pub fn scenarios(config: &Config, flags: &[(String, InputSignal)]) -> Result<Vec<Scenario>, CliError> {
    let mut base = parse_table(&config.inputs)?;
    base.extend(flags.iter().cloned());
    if config.scenarios.is_empty() {
        if base.is_empty() {
            return Ok(Vec::new());
        }
        return Ok(vec![Scenario { inputs: base }]);
    }
    config
        .scenarios
        .iter()
        .map(|table| {
            let mut inputs = base.clone();
            inputs.extend(parse_table(table)?);
            Ok(Scenario { inputs })
        })
        .collect()
}
