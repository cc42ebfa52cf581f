//! The `refcheck` command-line driver.
//!
//! Exit codes: 0 equivalent (exact or within the tube), 1 not equivalent,
//! 2 unknown or unsupported, 3 parse, validation, configuration or I/O error.

pub mod config;
pub mod report;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use refcheck_core::scenario::{parse_seed, InputSignal};
use refcheck_core::{
    check, extract, parse_bdl, rational::to_f64, simulate, validate, CheckError, ExtractError, Method, ModelClass,
    ModelError, ParseError, Scenario, SearchConfig, SimError, SolverConfig, TubeConfig, ValidatedModel, Verdict,
};

use crate::config::{parse_input, parse_method, Config};
use crate::report::{describe, CheckReport, EquationsReport, ModelInfo};

pub const SEED_ENV: &str = "REFCHECK_SEED";

pub const EXIT_EQUIVALENT: i32 = 0;
pub const EXIT_NOT_EQUIVALENT: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_ERROR: i32 = 3;

/// Exit code of a verdict.
pub fn exit_code(verdict: &Verdict) -> i32 {
    match verdict {
        Verdict::ExactEquivalent | Verdict::ApproxEquivalent { .. } => EXIT_EQUIVALENT,
        Verdict::NotEquivalent(_) => EXIT_NOT_EQUIVALENT,
        Verdict::Unknown(_) | Verdict::Unsupported(_) => EXIT_INCONCLUSIVE,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "refcheck",
    version,
    about = "Equivalence checking for refactored block-diagram models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decide whether two models behave the same
    Check(CheckArgs),
    /// Simulate a model and write its trace as CSV
    Simulate(SimulateArgs),
    /// Print the equations of a model
    Extract(ExtractArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Integration method: euler or rk4
    #[arg(long, value_parser = parse_method)]
    pub method: Option<Method>,
    /// Fixed step size
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub t0: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Input generator, NAME=const:C|step:T,B,A|sine:A,W,P|noise:SEED,A
    #[arg(long = "input", value_name = "NAME=SPEC", value_parser = parse_input)]
    pub inputs: Vec<(String, InputSignal)>,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    pub model_a: PathBuf,
    pub model_b: PathBuf,
    /// Tube width for continuous pairs
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Lipschitz constant L of the vector field, for the a-priori bound
    #[arg(long)]
    pub lipschitz: Option<f64>,
    /// Bound M on the (p+1)-th derivative of the solution, for the a-priori bound
    #[arg(long)]
    pub deriv_bound: Option<f64>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Write the JSON report here
    #[arg(long, value_name = "PATH")]
    pub json: Option<PathBuf>,
    /// Include normalised equations in the report
    #[arg(long)]
    pub equations: bool,
    /// TOML file with defaults for the flags above
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    pub model: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Write the CSV here instead of stdout
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ExtractArgs {
    pub model: PathBuf,
    /// Print normal forms instead of the raw substitution
    #[arg(long)]
    pub normalized: bool,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    /// Already rendered with source line and caret.
    #[error("{0}")]
    Parse(String),
    #[error("{path}: {source}")]
    Invalid { path: String, source: ModelError },
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

impl CliError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Reads, parses and validates one model file.
pub fn load_model(path: &Path) -> Result<ValidatedModel, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let model =
        parse_bdl(&text).map_err(|e: ParseError| CliError::Parse(e.render(&path.display().to_string(), &text)))?;
    validate(model).map_err(|source| CliError::Invalid {
        path: path.display().to_string(),
        source,
    })
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Solver settings from flags, then config, then defaults.
fn solver_config(
    flags: &SolverArgs,
    config: &Config,
    default_h: f64,
    default_method: Method,
) -> Result<SolverConfig, CliError> {
    let method = match flags.method {
        Some(m) => m,
        None => config.method()?.unwrap_or(default_method),
    };
    let h = flags.h.or(config.h).unwrap_or(default_h);
    let t0 = flags.t0.or(config.t0).unwrap_or(0.0);
    let t_end = flags.t_end.or(config.t_end).unwrap_or(10.0);
    Ok(SolverConfig::new(method, h, t0, t_end)?)
}

fn default_step(model: &ValidatedModel, continuous: f64) -> f64 {
    match model.class() {
        ModelClass::Discrete => to_f64(&model.model().sample_time),
        _ => continuous,
    }
}

fn search_config(config: &Config) -> Result<SearchConfig, CliError> {
    let mut search = SearchConfig::default();
    if let Some(seed) = config.seed {
        search.seed = seed;
    }
    if let Some(budget) = config.budget {
        search.budget = budget;
    }
    if let Ok(s) = std::env::var(SEED_ENV) {
        search.seed = parse_seed(&s).ok_or_else(|| CliError::Config(format!("{SEED_ENV}: invalid seed `{s}`")))?;
    }
    Ok(search)
}

fn info(path: &Path, model: &ValidatedModel) -> ModelInfo {
    ModelInfo {
        name: model.model().name.clone(),
        path: path.display().to_string(),
        class: model.class(),
    }
}

fn is_continuous_pair(a: &ValidatedModel, b: &ValidatedModel) -> bool {
    use ModelClass::*;
    matches!(
        (a.class(), b.class()),
        (Continuous, Continuous) | (Continuous, Unsampled) | (Unsampled, Continuous)
    )
}

fn equation_lines(model: &ValidatedModel) -> Vec<String> {
    match extract(model) {
        Ok(eqs) => eqs
            .display_normalized()
            .to_string()
            .lines()
            .map(str::to_string)
            .collect(),
        Err(e) => vec![format!("# {e}")],
    }
}

/// Runs `check` and returns the report; the caller maps it to an exit code.
pub fn run_check(args: &CheckArgs) -> Result<(CheckReport, Verdict), CliError> {
    let started = Instant::now();
    let config = match &args.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let a = load_model(&args.model_a)?;
    let b = load_model(&args.model_b)?;
    let search = search_config(&config)?;

    let tube = if is_continuous_pair(&a, &b) {
        let epsilon = args
            .epsilon
            .or(config.epsilon)
            .ok_or_else(|| CliError::Config("continuous pairs need --epsilon".into()))?;
        let cfg = solver_config(&args.solver, &config, 1e-3, Method::Rk4)?;
        let mut tube = TubeConfig::new(epsilon, cfg)?.with_scenarios(config::scenarios(&config, &args.solver.inputs)?);
        match (
            args.lipschitz.or(config.lipschitz),
            args.deriv_bound.or(config.deriv_bound),
        ) {
            (Some(l), Some(m)) => tube = tube.with_bounds(l, m)?,
            (None, None) => {}
            _ => return Err(CliError::Config("--lipschitz and --deriv-bound go together".into())),
        }
        Some(tube)
    } else {
        None
    };

    let verdict = check(&a, &b, tube.as_ref(), &search)?;
    let mut report = CheckReport::new(info(&args.model_a, &a), info(&args.model_b, &b), &verdict, &search);
    if let Some(tube) = &tube {
        report.epsilon = Some(tube.epsilon);
        report.solver = Some((&tube.cfg).into());
    }
    if args.equations {
        report.equations = Some(EquationsReport {
            a: equation_lines(&a),
            b: equation_lines(&b),
        });
    }
    report.timing_ms = started.elapsed().as_millis() as u64;
    Ok((report, verdict))
}

fn text_report(report: &CheckReport, out: &mut dyn Write) -> io::Result<()> {
    use report::VerdictReport as V;
    writeln!(
        out,
        "A: {} ({}) {}",
        report.model_a.name, report.model_a.class, report.model_a.path
    )?;
    writeln!(
        out,
        "B: {} ({}) {}",
        report.model_b.name, report.model_b.class, report.model_b.path
    )?;
    match &report.verdict {
        V::ExactEquivalent => writeln!(out, "verdict: exactly equivalent")?,
        V::ApproxEquivalent => {
            writeln!(
                out,
                "verdict: approximately equivalent, eps_measured = {:e} <= epsilon = {:e}",
                report.eps_measured.unwrap_or(0.0),
                report.epsilon.unwrap_or(0.0)
            )?;
            if let Some(bound) = report.eps_bound {
                writeln!(out, "a-priori pair bound: {bound:e}")?;
            }
        }
        V::NotEquivalent => {
            writeln!(out, "verdict: not equivalent")?;
            if let Some(cx) = &report.counterexample {
                writeln!(out, "counterexample: {}", describe(cx))?;
            }
        }
        V::Unknown { reason } => writeln!(out, "verdict: unknown ({reason})")?,
        V::Unsupported { reason } => writeln!(out, "verdict: unsupported ({reason})")?,
    }
    if let Some(eqs) = &report.equations {
        for (label, lines) in [("A", &eqs.a), ("B", &eqs.b)] {
            writeln!(out, "equations {label}:")?;
            for line in lines {
                writeln!(out, "  {line}")?;
            }
        }
    }
    Ok(())
}

pub fn cmd_check(args: &CheckArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match run_check(args) {
        Ok((report, verdict)) => {
            let _ = text_report(&report, out);
            if let Some(path) = &args.json {
                if let Err(e) = write_file(path, &report.to_json()) {
                    let _ = writeln!(err, "error: {e}");
                    return EXIT_ERROR;
                }
            }
            exit_code(&verdict)
        }
        Err(e) => {
            let _ = writeln!(err, "{}", error_text(&e));
            EXIT_ERROR
        }
    }
}

fn error_text(e: &CliError) -> String {
    match e {
        CliError::Parse(rendered) => rendered.trim_end().to_string(),
        other => format!("error: {other}"),
    }
}

pub fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = (|| -> Result<String, CliError> {
        let model = load_model(&args.model)?;
        let cfg = solver_config(
            &args.solver,
            &Config::default(),
            default_step(&model, 0.01),
            Method::Rk4,
        )?;
        let mut scenario = Scenario::new();
        for (name, signal) in &args.solver.inputs {
            scenario = scenario.with(name, signal.clone());
        }
        let scenario = scenario.fill_defaults(&model.model().inport_names());
        Ok(simulate(&model, &scenario, &cfg)?.to_csv())
    })();
    match result {
        Ok(csv) => match &args.out {
            Some(path) => match write_file(path, &csv) {
                Ok(()) => EXIT_EQUIVALENT,
                Err(e) => {
                    let _ = writeln!(err, "{}", error_text(&e));
                    EXIT_ERROR
                }
            },
            None => {
                let _ = out.write_all(csv.as_bytes());
                EXIT_EQUIVALENT
            }
        },
        Err(CliError::Sim(SimError::Unsupported(class))) => {
            let _ = writeln!(err, "unsupported: {class} models cannot be simulated");
            EXIT_INCONCLUSIVE
        }
        Err(e) => {
            let _ = writeln!(err, "{}", error_text(&e));
            EXIT_ERROR
        }
    }
}

pub fn cmd_extract(args: &ExtractArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let model = match load_model(&args.model) {
        Ok(m) => m,
        Err(e) => {
            let _ = writeln!(err, "{}", error_text(&e));
            return EXIT_ERROR;
        }
    };
    match extract(&model) {
        Ok(eqs) => {
            let text = if args.normalized {
                eqs.display_normalized().to_string()
            } else {
                eqs.to_string()
            };
            let _ = out.write_all(text.as_bytes());
            EXIT_EQUIVALENT
        }
        Err(e @ (ExtractError::Unsupported(_) | ExtractError::DiscreteFeedback(_))) => {
            let _ = writeln!(err, "unsupported: {e}");
            EXIT_INCONCLUSIVE
        }
    }
}

/// Parses `argv` and runs the command. Usage errors exit with 3, help and
/// version with 0.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_EQUIVALENT };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match &cli.command {
        Command::Check(args) => cmd_check(args, out, err),
        Command::Simulate(args) => cmd_simulate(args, out, err),
        Command::Extract(args) => cmd_extract(args, out, err),
    }
}
