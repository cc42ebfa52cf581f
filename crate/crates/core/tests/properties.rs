use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use refcheck_core::expr::SeqEnv;
use refcheck_core::generate::{random_expr, random_model, small_rational};
use refcheck_core::value::OpaqueFunctions;
use refcheck_core::{execution_order, normalize, parse_bdl, serialize_bdl, validate, ModelClass, SignalExpr};

const CLASSES: [ModelClass; 4] = [
    ModelClass::Unsampled,
    ModelClass::Discrete,
    ModelClass::Continuous,
    ModelClass::Hybrid,
];

fn env_for(e: &SignalExpr, rng: &mut ChaCha8Rng) -> (SeqEnv, usize) {
    let steps = e.max_delay() + 3;
    let seq = |rng: &mut ChaCha8Rng| (0..steps).map(|_| small_rational(rng, 4)).collect::<Vec<_>>();
    let env = SeqEnv {
        inputs: [("u".to_string(), seq(rng)), ("v".to_string(), seq(rng))].into(),
        times: seq(rng),
        ..Default::default()
    };
    (env, steps)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn serialize_then_parse_is_identity(seed: u64, class in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_model(&mut rng, CLASSES[class], "prop");
        let text = serialize_bdl(&m);
        let back = parse_bdl(&text).unwrap();
        prop_assert!(back.structurally_eq(&m));
        prop_assert_eq!(&back, &m.canonical());
        prop_assert_eq!(serialize_bdl(&back), text);
    }

    #[test]
    fn validation_is_idempotent(seed: u64, class in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = validate(random_model(&mut rng, CLASSES[class], "prop")).unwrap();
        let again = validate(v.model().clone()).unwrap();
        prop_assert_eq!(again, v);
    }

    #[test]
    fn execution_order_respects_feedthrough(seed: u64, class in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = validate(random_model(&mut rng, CLASSES[class], "prop")).unwrap();
        let order = execution_order(&v);
        prop_assert_eq!(order.len(), v.len());
        let pos = |i: usize| order.iter().position(|id| id == v.id(i)).unwrap();
        for &(src, dst) in v.feedthrough_edges() {
            prop_assert!(pos(src) < pos(dst), "{} must precede {}", v.id(src), v.id(dst));
        }
    }

    #[test]
    fn normalisation_preserves_value_and_is_idempotent(seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = random_expr(&mut rng, &["u", "v"], 4);
        let nf = normalize(&e);
        prop_assert_eq!(normalize(&nf.to_expr()), nf.clone());
        let (env, steps) = env_for(&e, &mut rng);
        for k in 0..steps {
            prop_assert_eq!(nf.eval_at(&env, k, &OpaqueFunctions), e.eval_at(&env, k, &OpaqueFunctions), "step {} of {}", k, e);
        }
    }

    #[test]
    fn nested_shifts_merge_soundly(seed: u64, d1 in 1usize..4, d2 in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inner = random_expr(&mut rng, &["u"], 2);
        let i1: Vec<_> = (0..d1).map(|_| small_rational(&mut rng, 3)).collect();
        let i2: Vec<_> = (0..d2).map(|_| small_rational(&mut rng, 3)).collect();
        let nested = SignalExpr::Shift {
            arg: Box::new(SignalExpr::Shift { arg: Box::new(inner.clone()), depth: d1, inits: i1.clone() }),
            depth: d2,
            inits: i2.clone(),
        };
        let merged = SignalExpr::shift(SignalExpr::shift(inner, d1, i1), d2, i2);
        let flat = match &merged {
            SignalExpr::Shift { arg, .. } => !matches!(**arg, SignalExpr::Shift { .. }),
            _ => false,
        };
        prop_assert!(flat);
        prop_assert_eq!(merged.max_delay(), nested.max_delay());
        prop_assert_eq!(normalize(&nested), normalize(&merged));
        let (env, steps) = env_for(&nested, &mut rng);
        for k in 0..steps {
            prop_assert_eq!(nested.eval_at(&env, k, &OpaqueFunctions), merged.eval_at(&env, k, &OpaqueFunctions));
        }
    }
}

#[test]
fn generated_text_survives_crlf_and_comments() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let m = random_model(&mut rng, ModelClass::Discrete, "crlf");
        let text: String = serialize_bdl(&m)
            .lines()
            .map(|l| {
                if rng.gen_bool(0.3) {
                    format!("  {l}   # note\r\n")
                } else {
                    format!("{l}\r\n")
                }
            })
            .collect();
        assert!(parse_bdl(&text).unwrap().structurally_eq(&m));
    }
}
