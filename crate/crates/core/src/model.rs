//! Block-diagram intermediate representation.
//!
//! A [`Model`] is a flat set of scalar blocks connected by wires. Every block
//! has at most one output port (port 0); input ports are numbered from 0.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::rational::{int, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn as_char(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnaryOp {
    Sin,
    Cos,
    Neg,
    Abs,
}

impl UnaryOp {
    pub const ALL: [UnaryOp; 4] = [UnaryOp::Sin, UnaryOp::Cos, UnaryOp::Neg, UnaryOp::Abs];

    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Neg => "neg",
            UnaryOp::Abs => "abs",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|op| op.name() == name)
    }

    pub fn apply_f64(self, x: f64) -> f64 {
        match self {
            UnaryOp::Sin => x.sin(),
            UnaryOp::Cos => x.cos(),
            UnaryOp::Neg => -x,
            UnaryOp::Abs => x.abs(),
        }
    }
}

impl fmt::Display for UnaryOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BlockKind {
    Inport,
    Outport,
    Constant {
        value: Rational,
    },
    /// Emits the simulation time.
    Clock,
    Gain {
        k: Rational,
    },
    Sum {
        signs: Vec<Sign>,
    },
    Product {
        arity: usize,
    },
    UnaryFn {
        op: UnaryOp,
    },
    UnitDelay {
        init: Rational,
    },
    Integrator {
        init: Rational,
    },
}

impl BlockKind {
    pub const NAMES: [&'static str; 10] = [
        "Inport",
        "Outport",
        "Constant",
        "Clock",
        "Gain",
        "Sum",
        "Product",
        "UnaryFn",
        "UnitDelay",
        "Integrator",
    ];

    pub fn name(&self) -> &'static str {
        match self {
            BlockKind::Inport => "Inport",
            BlockKind::Outport => "Outport",
            BlockKind::Constant { .. } => "Constant",
            BlockKind::Clock => "Clock",
            BlockKind::Gain { .. } => "Gain",
            BlockKind::Sum { .. } => "Sum",
            BlockKind::Product { .. } => "Product",
            BlockKind::UnaryFn { .. } => "UnaryFn",
            BlockKind::UnitDelay { .. } => "UnitDelay",
            BlockKind::Integrator { .. } => "Integrator",
        }
    }

    pub fn input_arity(&self) -> usize {
        match self {
            BlockKind::Inport | BlockKind::Constant { .. } | BlockKind::Clock => 0,
            BlockKind::Outport
            | BlockKind::Gain { .. }
            | BlockKind::UnaryFn { .. }
            | BlockKind::UnitDelay { .. }
            | BlockKind::Integrator { .. } => 1,
            BlockKind::Sum { signs } => signs.len(),
            BlockKind::Product { arity } => *arity,
        }
    }

    pub fn output_arity(&self) -> usize {
        match self {
            BlockKind::Outport => 0,
            _ => 1,
        }
    }

    /// Whether the output at time t depends on the input at time t.
    pub fn direct_feedthrough(&self) -> bool {
        !self.has_state()
    }

    pub fn has_state(&self) -> bool {
        matches!(self, BlockKind::UnitDelay { .. } | BlockKind::Integrator { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub id: String,
    pub kind: BlockKind,
}

impl Block {
    pub fn new(id: impl Into<String>, kind: BlockKind) -> Self {
        Self { id: id.into(), kind }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PortRef {
    pub block: String,
    pub port: usize,
}

impl PortRef {
    pub fn new(block: impl Into<String>, port: usize) -> Self {
        Self {
            block: block.into(),
            port,
        }
    }
}

impl fmt::Display for PortRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.block, self.port)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Wire {
    pub src: PortRef,
    pub dst: PortRef,
}

impl Wire {
    pub fn new(src: PortRef, dst: PortRef) -> Self {
        Self { src, dst }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Model {
    pub name: String,
    pub blocks: Vec<Block>,
    pub wires: Vec<Wire>,
    /// Base step of UnitDelay semantics.
    pub sample_time: Rational,
}

impl Model {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            blocks: Vec::new(),
            wires: Vec::new(),
            sample_time: int(1),
        }
    }

    pub fn block(&self, id: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.id == id)
    }

    pub fn add_block(&mut self, id: impl Into<String>, kind: BlockKind) -> &mut Self {
        self.blocks.push(Block::new(id, kind));
        self
    }

    /// Adds a wire from output port 0 of `src` to input `port` of `dst`.
    pub fn connect(&mut self, src: &str, dst: &str, port: usize) -> &mut Self {
        self.wires
            .push(Wire::new(PortRef::new(src, 0), PortRef::new(dst, port)));
        self
    }

    /// Copy with blocks sorted by id and wires sorted by destination port,
    /// the order used by the canonical text form.
    pub fn canonical(&self) -> Model {
        let mut m = self.clone();
        m.blocks.sort_by(|a, b| a.id.cmp(&b.id));
        m.wires
            .sort_by(|a, b| a.dst.cmp(&b.dst).then_with(|| a.src.cmp(&b.src)));
        m
    }

    /// Equality up to block and wire ordering.
    pub fn structurally_eq(&self, other: &Model) -> bool {
        self.canonical() == other.canonical()
    }

    pub fn ids_of(&self, pred: impl Fn(&BlockKind) -> bool) -> Vec<String> {
        let mut ids: Vec<String> = self
            .blocks
            .iter()
            .filter(|b| pred(&b.kind))
            .map(|b| b.id.clone())
            .collect();
        ids.sort();
        ids
    }

    pub fn inport_names(&self) -> Vec<String> {
        self.ids_of(|k| matches!(k, BlockKind::Inport))
    }

    pub fn outport_names(&self) -> Vec<String> {
        self.ids_of(|k| matches!(k, BlockKind::Outport))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelClass {
    Unsampled,
    Discrete,
    Continuous,
    Hybrid,
}

impl ModelClass {
    pub fn of_kinds<'a>(kinds: impl IntoIterator<Item = &'a BlockKind>) -> Self {
        let (mut delays, mut integrators) = (false, false);
        for kind in kinds {
            match kind {
                BlockKind::UnitDelay { .. } => delays = true,
                BlockKind::Integrator { .. } => integrators = true,
                _ => {}
            }
        }
        match (delays, integrators) {
            (false, false) => ModelClass::Unsampled,
            (true, false) => ModelClass::Discrete,
            (false, true) => ModelClass::Continuous,
            (true, true) => ModelClass::Hybrid,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelClass::Unsampled => "unsampled",
            ModelClass::Discrete => "discrete",
            ModelClass::Continuous => "continuous",
            ModelClass::Hybrid => "hybrid",
        }
    }
}

impl fmt::Display for ModelClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}
