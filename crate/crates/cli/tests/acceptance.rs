//! One line per acceptance criterion: `PASS n: ...` or `FAIL n: ...`.
//! Exits non-zero when any criterion fails.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::thread;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use refcheck_cli::config::parse_method;
use refcheck_core::expr::SeqEnv;
use refcheck_core::generate::{random_expr, random_model, random_scenario, small_rational};
use refcheck_core::rational::to_f64;
use refcheck_core::value::OpaqueFunctions;
use refcheck_core::{
    check, epsilon_bound, eval_equations, extract, normalize, parse_bdl, serialize_bdl, simulate, validate,
    Counterexample, Method, ModelClass, ParseErrorKind, SearchConfig, SolverConfig, TubeConfig, ValidatedModel,
    Verdict,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn load(path: &Path) -> ValidatedModel {
    validate(parse_bdl(&fs::read_to_string(path).unwrap()).unwrap()).unwrap()
}

fn model(text: &str) -> ValidatedModel {
    validate(parse_bdl(text).unwrap()).unwrap()
}

#[derive(Debug, Deserialize)]
struct Manifest {
    pair: Vec<Pair>,
}

#[derive(Debug, Clone, Deserialize)]
struct Pair {
    name: String,
    a: String,
    b: String,
    expect: String,
    epsilon: Option<f64>,
    method: Option<String>,
    h: Option<f64>,
    t_end: Option<f64>,
}

impl Pair {
    fn tube(&self) -> Option<TubeConfig> {
        let epsilon = self.epsilon?;
        let method = self.method.as_deref().map_or(Method::Rk4, |m| parse_method(m).unwrap());
        let cfg = SolverConfig::new(method, self.h.unwrap_or(1e-3), 0.0, self.t_end.unwrap_or(10.0)).unwrap();
        Some(TubeConfig::new(epsilon, cfg).unwrap())
    }

    fn cli_args(&self) -> Vec<String> {
        let dir = corpus_dir();
        let mut args = vec![
            "check".to_string(),
            dir.join(&self.a).display().to_string(),
            dir.join(&self.b).display().to_string(),
        ];
        let flags = [
            ("--epsilon", self.epsilon.map(|v| v.to_string())),
            ("--method", self.method.clone()),
            ("--h", self.h.map(|v| v.to_string())),
            ("--t-end", self.t_end.map(|v| v.to_string())),
        ];
        for (flag, value) in flags {
            if let Some(v) = value {
                args.push(flag.into());
                args.push(v);
            }
        }
        args
    }
}

fn manifest() -> Vec<Pair> {
    let text = fs::read_to_string(corpus_dir().join("pairs.toml")).unwrap();
    toml::from_str::<Manifest>(&text).unwrap().pair
}

fn soundness_config(m: &ValidatedModel, method: Method) -> SolverConfig {
    match m.class() {
        ModelClass::Discrete => {
            let h = to_f64(&m.model().sample_time);
            SolverConfig::new(method, h, 0.0, 20.0 * h).unwrap()
        }
        _ => SolverConfig::new(method, 0.01, 0.0, 1.0).unwrap(),
    }
}

fn extraction_soundness() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE97);
    let mut worst: f64 = 0.0;
    let mut runs = 0;
    for class in [ModelClass::Unsampled, ModelClass::Discrete, ModelClass::Continuous] {
        for i in 0..200 {
            let m = validate(random_model(&mut rng, class, &format!("m{i}"))).unwrap();
            ensure!(m.class() == class, "model {i} is {} not {class}", m.class());
            let eqs = extract(&m).map_err(|e| format!("{class} model {i}: {e}"))?;
            for s in 0..5 {
                let method = if s % 2 == 0 { Method::Rk4 } else { Method::ForwardEuler };
                let cfg = soundness_config(&m, method);
                let scenario = random_scenario(&mut rng, &m.model().inport_names());
                let sim = simulate(&m, &scenario, &cfg).map_err(|e| e.to_string())?;
                let eq = eval_equations(&eqs, &scenario, &cfg).map_err(|e| e.to_string())?;
                runs += 1;
                if class == ModelClass::Continuous {
                    let dev = sim.max_deviation(&eq).map_or(0.0, |d| d.value);
                    worst = worst.max(dev);
                    ensure!(dev <= 1e-12, "{class} model {i} scenario {s}: deviation {dev:e}");
                } else {
                    ensure!(sim == eq, "{class} model {i} scenario {s}: traces differ");
                }
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    ensure!(secs < 60.0, "took {secs:.1} s");
    Ok(format!(
        "{runs} runs, exact for unsampled/discrete, continuous sup-norm {worst:e}, {secs:.1} s"
    ))
}

fn corpus_verdicts() -> Outcome {
    let pairs = manifest();
    let dir = corpus_dir();
    let search = SearchConfig::default();
    let mut counts = [0usize; 3];
    for pair in &pairs {
        let (a, b) = (load(&dir.join(&pair.a)), load(&dir.join(&pair.b)));
        let tube = pair.tube();
        let verdict = check(&a, &b, tube.as_ref(), &search).map_err(|e| format!("{}: {e}", pair.name))?;
        ensure!(
            verdict.kind() == pair.expect,
            "{}: expected {}, got {verdict:?}",
            pair.name,
            pair.expect
        );
        match &verdict {
            Verdict::ExactEquivalent => counts[0] += 1,
            Verdict::NotEquivalent(cx) => {
                counts[1] += 1;
                let replays = match cx {
                    Counterexample::Symbolic(s) => s.replay(&extract(&a).unwrap(), &extract(&b).unwrap()).is_some(),
                    Counterexample::Trace(t) => {
                        let tube = tube.as_ref().unwrap();
                        t.replay(&a, &b, tube).map_err(|e| e.to_string())? > tube.epsilon
                    }
                };
                ensure!(replays, "{}: counterexample does not replay", pair.name);
            }
            _ => counts[2] += 1,
        }
    }
    for required in ["distributivity", "gain_fusion", "sum_reassociation"]
        .into_iter()
        .map(String::from)
        .chain((1..=5).map(|d| format!("delay_chain_{d}")))
    {
        ensure!(
            pairs
                .iter()
                .any(|p| p.name == required && p.expect == "exact_equivalent"),
            "corpus lacks {required}"
        );
    }
    ensure!(pairs.len() >= 30, "only {} pairs", pairs.len());
    Ok(format!(
        "{} pairs, 0 false verdicts ({} exact, {} not equivalent with replayable counterexamples, {} other)",
        pairs.len(),
        counts[0],
        counts[1],
        counts[2]
    ))
}

const OSC: &str = "continuous/oscillator.bdl";
const SIN: &str = "continuous/analytic_sin.bdl";

fn oscillator(method: Method, h: f64, t_end: f64, epsilon: f64) -> Verdict {
    let dir = corpus_dir();
    let tube = TubeConfig::new(epsilon, SolverConfig::new(method, h, 0.0, t_end).unwrap()).unwrap();
    check(
        &load(&dir.join(OSC)),
        &load(&dir.join(SIN)),
        Some(&tube),
        &SearchConfig::default(),
    )
    .unwrap()
}

fn continuous_catalog() -> Outcome {
    let rk4 = match oscillator(Method::Rk4, 1e-3, 10.0, 1e-5) {
        Verdict::ApproxEquivalent { eps_measured, .. } if eps_measured <= 1e-6 => eps_measured,
        v => return Err(format!("rk4: {v:?}")),
    };
    let euler = match oscillator(Method::ForwardEuler, 1e-3, 10.0, 1e-5) {
        Verdict::NotEquivalent(Counterexample::Trace(t)) => (t.value_a - t.value_b).abs(),
        v => return Err(format!("euler: {v:?}")),
    };
    ensure!(euler > 1e-5, "euler deviation {euler:e}");
    Ok(format!(
        "rk4 eps_measured {rk4:e} <= 1e-6, euler deviation {euler:e} > 1e-5"
    ))
}

fn measured(method: Method, h: f64, t_end: f64) -> f64 {
    match oscillator(method, h, t_end, f64::MAX) {
        Verdict::ApproxEquivalent { eps_measured, .. } => eps_measured,
        v => panic!("{v:?}"),
    }
}

fn tube_growth() -> Outcome {
    for (l, m, method, h) in [(1.0, 1.0, Method::ForwardEuler, 1e-3), (2.0, 0.5, Method::Rk4, 1e-2)] {
        let grid: Vec<f64> = (1..=10)
            .map(|i| epsilon_bound(l, m, method, h, 0.0, i as f64))
            .collect();
        ensure!(
            grid.windows(2).all(|w| w[0] < w[1]),
            "{method:?} bound not increasing: {grid:?}"
        );
    }
    let (t10, t20) = (
        measured(Method::ForwardEuler, 1e-3, 10.0),
        measured(Method::ForwardEuler, 1e-3, 20.0),
    );
    ensure!(t20 >= t10, "euler tube at T=20 {t20:e} < T=10 {t10:e}");
    Ok(format!(
        "bound increasing over T=1..10; euler tube {t10:e} (T=10) <= {t20:e} (T=20)"
    ))
}

const COS_INTEGRATOR: &str = "model m\nblock t Clock\nblock c UnaryFn op=cos\nblock x Integrator init=0\n\
     block y Outport\nwire t.0 -> c.0\nwire c.0 -> x.0\nwire x.0 -> y.0";

fn slope(method: Method) -> f64 {
    let m = model(COS_INTEGRATOR);
    let points: Vec<(f64, f64)> = [1e-1, 1e-2, 1e-3]
        .iter()
        .map(|&h| {
            let cfg = SolverConfig::new(method, h, 0.0, 1.0).unwrap();
            let trace = simulate(&m, &Default::default(), &cfg).unwrap();
            let err = trace
                .times
                .iter()
                .zip(trace.signal("y").unwrap())
                .map(|(t, y)| (y - t.sin()).abs())
                .fold(0.0, f64::max);
            (h.log10(), err.log10())
        })
        .collect();
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn convergence_orders() -> Outcome {
    let (euler, rk4) = (slope(Method::ForwardEuler), slope(Method::Rk4));
    ensure!((euler - 1.0).abs() <= 0.3, "euler slope {euler:.3}");
    ensure!((rk4 - 4.0).abs() <= 0.3, "rk4 slope {rk4:.3}");
    Ok(format!("euler slope {euler:.3}, rk4 slope {rk4:.3}"))
}

fn normalization_soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0A11);
    let mut evaluations = 0;
    for i in 0..1000 {
        let depth = rng.gen_range(1..=6);
        let e = random_expr(&mut rng, &["u", "v", "w"], depth);
        let nf = normalize(&e);
        ensure!(normalize(&nf.to_expr()) == nf, "expression {i} not idempotent: {e}");
        let steps = e.max_delay() + 2;
        for _ in 0..50 {
            let mut seq = || (0..steps).map(|_| small_rational(&mut rng, 4)).collect::<Vec<_>>();
            let env = SeqEnv {
                inputs: [("u".into(), seq()), ("v".into(), seq()), ("w".into(), seq())].into(),
                times: seq(),
                ..Default::default()
            };
            for k in 0..steps {
                let (lhs, rhs) = (
                    nf.eval_at(&env, k, &OpaqueFunctions),
                    e.eval_at(&env, k, &OpaqueFunctions),
                );
                ensure!(lhs == rhs, "expression {i} at step {k}: {lhs} vs {rhs} for {e}");
                evaluations += 1;
            }
        }
    }
    Ok(format!(
        "1000 expressions, {evaluations} exact evaluations agree, normalize idempotent"
    ))
}

fn kind_name(kind: ParseErrorKind) -> &'static str {
    match kind {
        ParseErrorKind::Lex => "lex",
        ParseErrorKind::Syntax => "syntax",
        ParseErrorKind::UnknownKind => "unknown_kind",
        ParseErrorKind::BadParam => "bad_param",
    }
}

fn parser_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9A85E);
    let classes = [
        ModelClass::Unsampled,
        ModelClass::Discrete,
        ModelClass::Continuous,
        ModelClass::Hybrid,
    ];
    for i in 0..500 {
        let m = random_model(&mut rng, classes[i % 4], &format!("m{i}"));
        let text = serialize_bdl(&m);
        let back = parse_bdl(&text).map_err(|e| format!("model {i}: {e}"))?;
        ensure!(back.structurally_eq(&m), "model {i} changed in round trip");
        ensure!(back == m.canonical(), "model {i} is not canonical after parsing");
        ensure!(
            serialize_bdl(&back) == text,
            "model {i} is not a serialization fixpoint"
        );
    }
    let mut fixtures = 0;
    for entry in fs::read_dir(corpus_dir().join("malformed")).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        let expect = text
            .lines()
            .next()
            .and_then(|l| l.strip_prefix("# expect: "))
            .unwrap_or("")
            .trim();
        let err = match parse_bdl(&text) {
            Ok(_) => return Err(format!("{} parsed", path.display())),
            Err(e) => e,
        };
        let got = format!("{} {}:{}", kind_name(err.kind), err.span.line, err.span.column);
        ensure!(got == expect, "{}: got {got}, expected {expect}", path.display());
        fixtures += 1;
    }
    Ok(format!(
        "500 models round-trip, {fixtures} malformed fixtures at the expected line:column"
    ))
}

fn exit_for(expect: &str) -> i32 {
    match expect {
        "exact_equivalent" | "approx_equivalent" => 0,
        "not_equivalent" => 1,
        _ => 2,
    }
}

fn without_timing(text: &str) -> String {
    text.lines()
        .filter(|l| !l.trim_start().starts_with("\"timing_ms\""))
        .collect::<Vec<_>>()
        .join("\n")
}

fn cli_contract() -> Outcome {
    let schema_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/report.schema.json");
    let schema: serde_json::Value = serde_json::from_str(&fs::read_to_string(schema_path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).map_err(|e| format!("schema: {e}"))?;
    let dir = tempfile::tempdir().unwrap();
    let pairs = manifest();
    let results: Vec<Outcome> = thread::scope(|scope| {
        let handles: Vec<_> = pairs
            .iter()
            .enumerate()
            .map(|(i, pair)| {
                let (dir, validator) = (dir.path(), &validator);
                scope.spawn(move || -> Outcome {
                    let mut texts = Vec::new();
                    for run in 0..2 {
                        let json = dir.join(format!("{i}_{run}.json"));
                        let status = Command::new(env!("CARGO_BIN_EXE_refcheck"))
                            .args(pair.cli_args())
                            .arg("--json")
                            .arg(&json)
                            .env_remove("REFCHECK_SEED")
                            .output()
                            .unwrap()
                            .status;
                        ensure!(
                            status.code() == Some(exit_for(&pair.expect)),
                            "{}: exit {:?}, expected {}",
                            pair.name,
                            status.code(),
                            exit_for(&pair.expect)
                        );
                        let text = fs::read_to_string(&json).unwrap();
                        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
                        if let Err(e) = validator.validate(&value) {
                            return Err(format!("{}: schema violation: {e}", pair.name));
                        }
                        texts.push(without_timing(&text));
                    }
                    ensure!(texts[0] == texts[1], "{}: reports differ between runs", pair.name);
                    Ok(String::new())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    for r in results {
        r?;
    }
    let bad = corpus_dir().join("malformed/missing_arrow.bdl");
    let status = Command::new(env!("CARGO_BIN_EXE_refcheck"))
        .arg("check")
        .arg(&bad)
        .arg(&bad)
        .output()
        .unwrap()
        .status;
    ensure!(status.code() == Some(3), "malformed input exits {:?}", status.code());
    Ok(format!(
        "{} pairs: exit codes match, reports validate against the schema and are byte-identical across runs",
        pairs.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("extraction soundness", extraction_soundness),
        ("exact refactoring catalog", corpus_verdicts),
        ("continuous catalog", continuous_catalog),
        ("tube growth", tube_growth),
        ("convergence orders", convergence_orders),
        ("normalization soundness", normalization_soundness),
        ("parser round trip", parser_round_trip),
        ("cli contract", cli_contract),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (n, (name, criterion)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(criterion)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {}: {name} ({detail}) [{secs:.1} s]", n + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {}: {name} ({detail}) [{secs:.1} s]", n + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
