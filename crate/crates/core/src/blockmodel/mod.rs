//! Block-diagram model language: parser, SUT resolution and a fixed-step
//! synchronous simulator.
//!
//! A model file (`.bdm`) describes one test suite: an optional system under
//! test, an optional shared fixture, named helper subsystems and any number
//! of test subsystems whose names start with `test`. Each test wires sources
//! into the SUT and compares outputs with `assert_eq` blocks on every step.

mod parse;
mod resolve;
mod sim;

use std::fmt;
use std::path::PathBuf;

pub use parse::{parse_model, parse_model_file, ParseError, ParseErrorKind};
pub use resolve::{resolve_sut, ResolveError};
pub use sim::{
    is_time_invariant, simulate, simulate_exact, AssertionOutcome, SimError, SimTrace, SinkSeries,
};

/// Simulation horizon used when a suite has no `steps` directive.
pub const DEFAULT_STEPS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
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

/// Block kinds and their parameters.
///
/// Every kind has at most one output port, named `out`.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockKind {
    Const(f64),
    /// Emits `before` until step `at`, then `after`.
    Step { at: u64, before: f64, after: f64 },
    /// Emits the listed values one per step, holding the last one.
    Sequence(Vec<f64>),
    /// Emits `step * dt`.
    Clock { dt: f64 },
    Gain(f64),
    Sum(Vec<Sign>),
    Product(usize),
    /// Unit delay: emits the previous step's input, `initial` at step 0.
    Delay { initial: f64 },
    Saturate { lo: f64, hi: f64 },
    /// Records its input every step.
    Sink,
    /// Compares `actual` against `expected` every step.
    AssertEq { tol: f64 },
}

impl BlockKind {
    pub fn name(&self) -> &'static str {
        match self {
            BlockKind::Const(_) => "const",
            BlockKind::Step { .. } => "step",
            BlockKind::Sequence(_) => "sequence",
            BlockKind::Clock { .. } => "clock",
            BlockKind::Gain(_) => "gain",
            BlockKind::Sum(_) => "sum",
            BlockKind::Product(_) => "product",
            BlockKind::Delay { .. } => "delay",
            BlockKind::Saturate { .. } => "saturate",
            BlockKind::Sink => "sink",
            BlockKind::AssertEq { .. } => "assert_eq",
        }
    }

    pub fn input_ports(&self) -> Vec<String> {
        match self {
            BlockKind::Const(_)
            | BlockKind::Step { .. }
            | BlockKind::Sequence(_)
            | BlockKind::Clock { .. } => Vec::new(),
            BlockKind::Gain(_)
            | BlockKind::Delay { .. }
            | BlockKind::Saturate { .. }
            | BlockKind::Sink => vec!["in".to_string()],
            BlockKind::Sum(signs) => numbered_ports(signs.len()),
            BlockKind::Product(n) => numbered_ports(*n),
            BlockKind::AssertEq { .. } => vec!["actual".to_string(), "expected".to_string()],
        }
    }

    pub fn has_output(&self) -> bool {
        !matches!(self, BlockKind::Sink | BlockKind::AssertEq { .. })
    }

    /// Kinds whose output depends on the step index or on earlier steps.
    pub fn is_time_dependent(&self) -> bool {
        matches!(
            self,
            BlockKind::Step { .. }
                | BlockKind::Sequence(_)
                | BlockKind::Clock { .. }
                | BlockKind::Delay { .. }
        )
    }
}

fn numbered_ports(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("in{i}")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub id: String,
    pub kind: BlockKind,
    pub line: usize,
}

/// One end of a wire, with the port already resolved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    Block { id: String, port: String },
    /// A boundary `in` port when used as a source, an `out` port as a sink.
    Boundary(String),
    /// A port of the system under test, only valid inside tests.
    Sut(String),
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Block { id, port } => write!(f, "{id}.{port}"),
            Endpoint::Boundary(name) => f.write_str(name),
            Endpoint::Sut(port) => write!(f, "sut.{port}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Wire {
    pub src: Endpoint,
    pub dst: Endpoint,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subsystem {
    pub name: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub blocks: Vec<Block>,
    pub wires: Vec<Wire>,
    pub line: usize,
}

impl Subsystem {
    pub fn block(&self, id: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.id == id)
    }

    pub fn uses_sut(&self) -> bool {
        self.wires
            .iter()
            .any(|w| matches!(w.src, Endpoint::Sut(_)) || matches!(w.dst, Endpoint::Sut(_)))
    }

    pub fn assertion_count(&self) -> usize {
        self.blocks
            .iter()
            .filter(|b| matches!(b.kind, BlockKind::AssertEq { .. }))
            .count()
    }
}

/// `<path>#<name>` pointing at a subsystem in another model file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelRef {
    pub path: String,
    pub name: String,
    pub line: usize,
}

impl fmt::Display for ModelRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.path, self.name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SubsystemDef {
    Inline(Subsystem),
    Reference { name: String, target: ModelRef },
}

impl SubsystemDef {
    pub fn name(&self) -> &str {
        match self {
            SubsystemDef::Inline(s) => &s.name,
            SubsystemDef::Reference { name, .. } => name,
        }
    }

    pub fn as_inline(&self) -> Option<&Subsystem> {
        match self {
            SubsystemDef::Inline(s) => Some(s),
            SubsystemDef::Reference { .. } => None,
        }
    }
}

/// A parsed model suite.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGraph {
    pub suite_name: String,
    /// File the suite was read from, when known.
    pub source: Option<PathBuf>,
    pub steps: usize,
    pub sut: Option<SubsystemDef>,
    pub fixture: Option<Subsystem>,
    /// Named subsystems in file order, tests included.
    pub subsystems: Vec<SubsystemDef>,
}

impl ModelGraph {
    /// Inline subsystems whose name starts with `test`, in file order.
    pub fn tests(&self) -> impl Iterator<Item = &Subsystem> {
        self.subsystems
            .iter()
            .filter_map(SubsystemDef::as_inline)
            .filter(|s| s.name.starts_with("test"))
    }

    pub fn test(&self, name: &str) -> Option<&Subsystem> {
        self.tests().find(|t| t.name == name)
    }

    pub fn subsystem(&self, name: &str) -> Option<&SubsystemDef> {
        self.subsystems.iter().find(|s| s.name() == name)
    }
}
