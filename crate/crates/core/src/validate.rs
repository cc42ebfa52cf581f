//! Structural validation, classification and execution ordering.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::Signed;
use thiserror::Error;

use crate::model::{is_identifier, BlockKind, Model, ModelClass};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("duplicate block id `{0}`")]
    DuplicateId(String),
    #[error("invalid identifier `{0}`")]
    InvalidId(String),
    #[error("block `{block}`: {reason}")]
    InvalidParam { block: String, reason: String },
    #[error("sample time must be positive")]
    InvalidSampleTime,
    #[error("wire {src} -> {dst} references an unknown block or port")]
    DanglingWire { src: String, dst: String },
    #[error("input port {port} of block `{block}` has no incoming wire")]
    UnconnectedInput { block: String, port: usize },
    #[error("input port {port} of block `{block}` has more than one driver")]
    DuplicateDriver { block: String, port: usize },
    #[error("model has no Outport")]
    NoOutport,
    #[error("algebraic loop through blocks [{}]", .cycle.join(", "))]
    AlgebraicLoop { cycle: Vec<String> },
}

/// A model that passed [`validate`], annotated with its driver table,
/// feedthrough graph, execution order and class.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedModel {
    model: Model,
    index: BTreeMap<String, usize>,
    /// `drivers[b][p]` is the block whose output feeds input port `p` of block `b`.
    drivers: Vec<Vec<usize>>,
    /// Edges `src -> dst` whose destination has direct feedthrough.
    feedthrough: Vec<(usize, usize)>,
    order: Vec<usize>,
    class: ModelClass,
}

impl ValidatedModel {
    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn into_model(self) -> Model {
        self.model
    }

    pub fn class(&self) -> ModelClass {
        self.class
    }

    pub fn len(&self) -> usize {
        self.model.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.model.blocks.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn id(&self, idx: usize) -> &str {
        &self.model.blocks[idx].id
    }

    pub fn kind(&self, idx: usize) -> &BlockKind {
        &self.model.blocks[idx].kind
    }

    pub fn arity(&self, idx: usize) -> usize {
        self.drivers[idx].len()
    }

    pub fn drivers(&self, idx: usize) -> &[usize] {
        &self.drivers[idx]
    }

    pub fn feedthrough_edges(&self) -> &[(usize, usize)] {
        &self.feedthrough
    }

    /// Block indices in execution order.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Block indices of the given kinds, sorted by id.
    pub fn blocks_where(&self, pred: impl Fn(&BlockKind) -> bool) -> Vec<usize> {
        self.index.values().copied().filter(|&i| pred(self.kind(i))).collect()
    }

    pub fn inports(&self) -> Vec<usize> {
        self.blocks_where(|k| matches!(k, BlockKind::Inport))
    }

    pub fn outports(&self) -> Vec<usize> {
        self.blocks_where(|k| matches!(k, BlockKind::Outport))
    }

    pub fn stateful(&self) -> Vec<usize> {
        self.blocks_where(BlockKind::has_state)
    }
}

pub fn validate(model: Model) -> Result<ValidatedModel, ModelError> {
    if !is_identifier(&model.name) {
        return Err(ModelError::InvalidId(model.name.clone()));
    }
    if !model.sample_time.is_positive() {
        return Err(ModelError::InvalidSampleTime);
    }
    let mut index = BTreeMap::new();
    for (i, block) in model.blocks.iter().enumerate() {
        if !is_identifier(&block.id) {
            return Err(ModelError::InvalidId(block.id.clone()));
        }
        if index.insert(block.id.clone(), i).is_some() {
            return Err(ModelError::DuplicateId(block.id.clone()));
        }
        check_params(&block.id, &block.kind)?;
    }

    let mut slots: Vec<Vec<Option<usize>>> = model.blocks.iter().map(|b| vec![None; b.kind.input_arity()]).collect();
    for wire in &model.wires {
        let dangling = || ModelError::DanglingWire {
            src: wire.src.to_string(),
            dst: wire.dst.to_string(),
        };
        let src = *index.get(&wire.src.block).ok_or_else(dangling)?;
        let dst = *index.get(&wire.dst.block).ok_or_else(dangling)?;
        if wire.src.port >= model.blocks[src].kind.output_arity() {
            return Err(dangling());
        }
        let slot = slots[dst].get_mut(wire.dst.port).ok_or_else(dangling)?;
        if slot.replace(src).is_some() {
            return Err(ModelError::DuplicateDriver {
                block: wire.dst.block.clone(),
                port: wire.dst.port,
            });
        }
    }
    let mut drivers = Vec::with_capacity(slots.len());
    for &i in index.values() {
        if let Some(port) = slots[i].iter().position(Option::is_none) {
            return Err(ModelError::UnconnectedInput {
                block: model.blocks[i].id.clone(),
                port,
            });
        }
    }
    for block_slots in slots {
        drivers.push(block_slots.into_iter().map(Option::unwrap).collect::<Vec<_>>());
    }
    if !model.blocks.iter().any(|b| matches!(b.kind, BlockKind::Outport)) {
        return Err(ModelError::NoOutport);
    }

    let mut feedthrough = Vec::new();
    for (dst, srcs) in drivers.iter().enumerate() {
        if model.blocks[dst].kind.direct_feedthrough() {
            feedthrough.extend(srcs.iter().map(|&src| (src, dst)));
        }
    }
    feedthrough.sort_unstable();

    let order = topological_order(&model, &index, &feedthrough)?;
    let class = ModelClass::of_kinds(model.blocks.iter().map(|b| &b.kind));
    Ok(ValidatedModel {
        model,
        index,
        drivers,
        feedthrough,
        order,
        class,
    })
}

fn check_params(id: &str, kind: &BlockKind) -> Result<(), ModelError> {
    let bad = |reason: &str| ModelError::InvalidParam {
        block: id.to_string(),
        reason: reason.to_string(),
    };
    match kind {
        BlockKind::Sum { signs } if signs.len() < 2 => Err(bad("Sum needs at least two inputs")),
        BlockKind::Product { arity } if *arity < 2 => Err(bad("Product needs at least two inputs")),
        _ => Ok(()),
    }
}

/// Kahn's algorithm over the feedthrough graph, always releasing the
/// lexicographically smallest ready id.
fn topological_order(
    model: &Model,
    index: &BTreeMap<String, usize>,
    edges: &[(usize, usize)],
) -> Result<Vec<usize>, ModelError> {
    let n = model.blocks.len();
    // rank[i] is the position of block i in id order
    let by_id: Vec<usize> = index.values().copied().collect();
    let mut rank = vec![0; n];
    for (r, &i) in by_id.iter().enumerate() {
        rank[i] = r;
    }
    let mut succ = vec![Vec::new(); n];
    let mut indegree = vec![0usize; n];
    for &(src, dst) in edges {
        succ[src].push(dst);
        indegree[dst] += 1;
    }
    let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indegree[i] == 0).map(|i| rank[i]).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(r) = ready.pop_first() {
        let i = by_id[r];
        order.push(i);
        for &j in &succ[i] {
            indegree[j] -= 1;
            if indegree[j] == 0 {
                ready.insert(rank[j]);
            }
        }
    }
    if order.len() == n {
        return Ok(order);
    }
    Err(ModelError::AlgebraicLoop {
        cycle: find_cycle(model, &by_id, &indegree, edges),
    })
}

/// Every block left with positive in-degree after Kahn's algorithm has a
/// predecessor that was also left over, so walking predecessors must revisit
/// a block.
fn find_cycle(model: &Model, by_id: &[usize], indegree: &[usize], edges: &[(usize, usize)]) -> Vec<String> {
    let start = *by_id.iter().find(|&&i| indegree[i] > 0).expect("leftover block");
    let pred = |v: usize| {
        edges
            .iter()
            .filter(|&&(s, d)| d == v && indegree[s] > 0)
            .map(|&(s, _)| s)
            .min_by(|&a, &b| model.blocks[a].id.cmp(&model.blocks[b].id))
            .expect("leftover predecessor")
    };
    let mut path = vec![start];
    let mut v = start;
    loop {
        v = pred(v);
        if let Some(pos) = path.iter().position(|&p| p == v) {
            let mut cycle: Vec<usize> = path[pos..].to_vec();
            // walked backwards; restore wire direction
            cycle.reverse();
            let min = (0..cycle.len())
                .min_by(|&a, &b| model.blocks[cycle[a]].id.cmp(&model.blocks[cycle[b]].id))
                .unwrap();
            cycle.rotate_left(min);
            return cycle.iter().map(|&i| model.blocks[i].id.clone()).collect();
        }
        path.push(v);
    }
}

pub fn classify(model: &ValidatedModel) -> ModelClass {
    model.class()
}

/// Block ids in execution order.
pub fn execution_order(model: &ValidatedModel) -> Vec<String> {
    model.order().iter().map(|&i| model.id(i).to_string()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Sign, UnaryOp};
    use crate::rational::int;

    fn constant_to_out() -> Model {
        let mut m = Model::new("m");
        m.add_block("c", BlockKind::Constant { value: int(1) })
            .add_block("y", BlockKind::Outport)
            .connect("c", "y", 0);
        m
    }

    #[test]
    fn minimal_model_is_valid() {
        let v = validate(constant_to_out()).unwrap();
        assert_eq!(v.class(), ModelClass::Unsampled);
        assert_eq!(execution_order(&v), ["c", "y"]);
    }

    #[test]
    fn gain_self_loop_is_algebraic() {
        let mut m = Model::new("m");
        m.add_block("a", BlockKind::Gain { k: int(2) })
            .add_block("y", BlockKind::Outport)
            .connect("a", "a", 0)
            .connect("a", "y", 0);
        assert_eq!(
            validate(m),
            Err(ModelError::AlgebraicLoop {
                cycle: vec!["a".into()]
            })
        );
    }

    #[test]
    fn loop_through_integrator_is_valid() {
        // x' = u - x
        let mut m = Model::new("m");
        m.add_block("u", BlockKind::Inport)
            .add_block(
                "s",
                BlockKind::Sum {
                    signs: vec![Sign::Plus, Sign::Minus],
                },
            )
            .add_block("x", BlockKind::Integrator { init: int(0) })
            .add_block("y", BlockKind::Outport)
            .connect("u", "s", 0)
            .connect("x", "s", 1)
            .connect("s", "x", 0)
            .connect("x", "y", 0);
        let v = validate(m).unwrap();
        assert_eq!(v.class(), ModelClass::Continuous);
        // the wire s -> x is not a feedthrough edge
        let s = v.index_of("s").unwrap();
        let x = v.index_of("x").unwrap();
        assert!(!v.feedthrough_edges().contains(&(s, x)));
        assert!(v.feedthrough_edges().contains(&(x, s)));
    }

    #[test]
    fn longer_loop_reports_cycle_in_wire_order() {
        let mut m = Model::new("m");
        m.add_block("b", BlockKind::Gain { k: int(2) })
            .add_block("a", BlockKind::UnaryFn { op: UnaryOp::Sin })
            .add_block("c", BlockKind::Gain { k: int(3) })
            .add_block("y", BlockKind::Outport)
            .connect("a", "b", 0)
            .connect("b", "c", 0)
            .connect("c", "a", 0)
            .connect("c", "y", 0);
        assert_eq!(
            validate(m),
            Err(ModelError::AlgebraicLoop {
                cycle: vec!["a".into(), "b".into(), "c".into()]
            })
        );
    }

    #[test]
    fn wiring_errors() {
        let mut dangling = constant_to_out();
        dangling.connect("c", "y", 9);
        assert!(matches!(validate(dangling), Err(ModelError::DanglingWire { .. })));

        let mut unknown = constant_to_out();
        unknown.connect("nope", "y", 0);
        assert!(matches!(validate(unknown), Err(ModelError::DanglingWire { .. })));

        let mut double = constant_to_out();
        double.connect("c", "y", 0);
        assert_eq!(
            validate(double),
            Err(ModelError::DuplicateDriver {
                block: "y".into(),
                port: 0
            })
        );

        let mut open = constant_to_out();
        open.add_block("g", BlockKind::Gain { k: int(1) });
        assert_eq!(
            validate(open),
            Err(ModelError::UnconnectedInput {
                block: "g".into(),
                port: 0
            })
        );

        let mut dup = constant_to_out();
        dup.add_block("c", BlockKind::Clock);
        assert_eq!(validate(dup), Err(ModelError::DuplicateId("c".into())));

        let mut no_out = Model::new("m");
        no_out.add_block("c", BlockKind::Clock);
        assert_eq!(validate(no_out), Err(ModelError::NoOutport));
    }

    #[test]
    fn arity_parameters() {
        let mut m = constant_to_out();
        m.add_block(
            "s",
            BlockKind::Sum {
                signs: vec![Sign::Plus],
            },
        );
        assert!(matches!(validate(m), Err(ModelError::InvalidParam { .. })));
    }

    #[test]
    fn chain_and_tie_break() {
        let mut m = Model::new("m");
        m.add_block("o", BlockKind::Outport)
            .add_block("g", BlockKind::Gain { k: int(2) })
            .add_block("c", BlockKind::Constant { value: int(1) })
            .connect("c", "g", 0)
            .connect("g", "o", 0);
        assert_eq!(execution_order(&validate(m).unwrap()), ["c", "g", "o"]);

        let mut two = Model::new("m");
        two.add_block("b1", BlockKind::Clock)
            .add_block("a1", BlockKind::Clock)
            .add_block("b2", BlockKind::Outport)
            .add_block("a2", BlockKind::Outport)
            .connect("a1", "a2", 0)
            .connect("b1", "b2", 0);
        assert_eq!(execution_order(&validate(two).unwrap()), ["a1", "a2", "b1", "b2"]);
    }

    #[test]
    fn integrator_precedes_its_feedback_gain() {
        // x' = -x
        let mut m = Model::new("m");
        m.add_block("x", BlockKind::Integrator { init: int(1) })
            .add_block("a_neg", BlockKind::Gain { k: int(-1) })
            .add_block("y", BlockKind::Outport)
            .connect("x", "a_neg", 0)
            .connect("a_neg", "x", 0)
            .connect("x", "y", 0);
        let order = execution_order(&validate(m).unwrap());
        let pos = |id: &str| order.iter().position(|o| o == id).unwrap();
        assert!(pos("x") < pos("a_neg"));
    }

    #[test]
    fn validate_is_idempotent() {
        let v = validate(constant_to_out()).unwrap();
        let again = validate(v.model().clone()).unwrap();
        assert_eq!(v, again);
    }
}
