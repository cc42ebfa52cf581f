//! Behavioural equivalence checking for refactored block-diagram models.
//!
//! A model is parsed from the `.bdl` text format ([`parser`]), validated
//! ([`validate`]) and either simulated ([`sim`]) or turned into equations
//! ([`extract`]). Pairs of models are compared by [`equiv::check`]:
//! unsampled and discrete models by normal forms of their equations,
//! continuous models by an epsilon tube around simulated traces.

pub mod equiv;
pub mod eval;
pub mod expr;
pub mod extract;
pub mod generate;
pub mod model;
pub mod normal;
pub mod parser;
pub mod rational;
pub mod scenario;
pub mod search;
pub mod sim;
pub mod validate;
pub mod value;

pub use equiv::{check, epsilon_bound, CheckError, Counterexample, SearchConfig, TubeConfig, Verdict};
pub use eval::eval_equations;
pub use expr::SignalExpr;
pub use extract::{extract, EquationSystem, ExtractError};
pub use model::{Block, BlockKind, Model, ModelClass, PortRef, Sign, UnaryOp, Wire};
pub use normal::{equal_normal, normalize, NormalForm};
pub use parser::{parse_bdl, serialize_bdl, ParseError, ParseErrorKind, SourceSpan};
pub use rational::Rational;
pub use scenario::{InputSignal, Scenario};
pub use sim::{simulate, Method, SimError, SolverConfig, Trace};
pub use validate::{classify, execution_order, validate, ModelError, ValidatedModel};
