use std::collections::HashMap;

use thiserror::Error;

use super::{BlockKind, Endpoint, ModelGraph, Subsystem, SubsystemDef};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("unknown test `{0}`")]
    UnknownTest(String),
    #[error("simulation horizon must be positive")]
    ZeroSteps,
    #[error("test uses `sut` but the suite declares none")]
    NoSut,
    #[error("sut reference `{0}` is unresolved")]
    UnresolvedSut(String),
    #[error("wire to missing port `{0}`")]
    MissingPort(String),
    #[error("input `{0}` is not wired")]
    UnwiredInput(String),
    #[error("algebraic loop through [{}]", .0.join(", "))]
    AlgebraicLoop(Vec<String>),
    #[error("non-finite value produced by `{block}` at step {step}")]
    NonFinite { block: String, step: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinkSeries {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssertionOutcome {
    pub block: String,
    /// Declaration line of the assertion block.
    pub line: usize,
    pub step: usize,
    pub actual: f64,
    pub expected: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub steps: usize,
    /// Sorted by sink name.
    pub sinks: Vec<SinkSeries>,
    /// Step-major, schedule order within a step.
    pub assertions: Vec<AssertionOutcome>,
}

impl SimTrace {
    pub fn failed(&self) -> bool {
        self.assertions.iter().any(|a| !a.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AssertionOutcome> {
        self.assertions.iter().filter(|a| !a.passed)
    }
}

#[derive(Debug, Clone)]
enum Op {
    Block(BlockKind),
    /// Boundary port; copies its single input.
    Pass,
}

#[derive(Debug, Clone)]
struct Node {
    name: String,
    op: Op,
    line: usize,
    inputs: Vec<Option<usize>>,
    input_names: Vec<String>,
}

/// Test, fixture and SUT flattened into one graph of single-output nodes.
struct ClosedGraph {
    nodes: Vec<Node>,
}

struct Builder {
    nodes: Vec<Node>,
    index: HashMap<String, usize>,
}

impl Builder {
    fn add(&mut self, name: String, op: Op, line: usize) -> usize {
        let input_names = match &op {
            Op::Block(k) => k.input_ports(),
            Op::Pass => vec!["in".to_string()],
        };
        let idx = self.nodes.len();
        self.index.insert(name.clone(), idx);
        self.nodes.push(Node {
            name,
            op,
            line,
            inputs: vec![None; input_names.len()],
            input_names,
        });
        idx
    }

    fn connect(&mut self, src: usize, dst: usize, port: &str) -> Result<(), SimError> {
        let node = &mut self.nodes[dst];
        let slot = node
            .input_names
            .iter()
            .position(|p| p == port)
            .ok_or_else(|| SimError::MissingPort(format!("{}.{port}", node.name)))?;
        node.inputs[slot] = Some(src);
        Ok(())
    }

    /// Adds a subsystem's blocks and boundary nodes under `prefix/`, wiring
    /// everything internal. Returns (input boundary nodes, output boundary nodes).
    fn embed(
        &mut self,
        sub: &Subsystem,
        prefix: &str,
    ) -> Result<(HashMap<String, usize>, HashMap<String, usize>), SimError> {
        let mut ins = HashMap::new();
        let mut outs = HashMap::new();
        let mut blocks = HashMap::new();
        for p in &sub.inputs {
            ins.insert(p.clone(), self.add(format!("{prefix}/in:{p}"), Op::Pass, sub.line));
        }
        for p in &sub.outputs {
            outs.insert(p.clone(), self.add(format!("{prefix}/out:{p}"), Op::Pass, sub.line));
        }
        for b in &sub.blocks {
            let idx = self.add(format!("{prefix}/{}", b.id), Op::Block(b.kind.clone()), b.line);
            blocks.insert(b.id.clone(), idx);
        }
        for w in &sub.wires {
            let src = match &w.src {
                Endpoint::Block { id, .. } => blocks[id],
                Endpoint::Boundary(p) => ins[p],
                Endpoint::Sut(p) => return Err(SimError::MissingPort(format!("sut.{p}"))),
            };
            match &w.dst {
                Endpoint::Block { id, port } => self.connect(src, blocks[id], port)?,
                Endpoint::Boundary(p) => self.connect(src, outs[p], "in")?,
                Endpoint::Sut(p) => return Err(SimError::MissingPort(format!("sut.{p}"))),
            }
        }
        Ok((ins, outs))
    }
}

fn close(graph: &ModelGraph, test_name: &str) -> Result<ClosedGraph, SimError> {
    let test = graph
        .test(test_name)
        .ok_or_else(|| SimError::UnknownTest(test_name.to_string()))?;
    let mut b = Builder {
        nodes: Vec::new(),
        index: HashMap::new(),
    };

    let mut sut_ports = None;
    if test.uses_sut() {
        let sut = match &graph.sut {
            None => return Err(SimError::NoSut),
            Some(SubsystemDef::Reference { target, .. }) => {
                return Err(SimError::UnresolvedSut(target.to_string()))
            }
            Some(SubsystemDef::Inline(s)) => s,
        };
        let (sut_ins, sut_outs) = b.embed(sut, "sut")?;
        let drive = match &graph.fixture {
            Some(fixture) => {
                let (fix_ins, fix_outs) = b.embed(fixture, "fixture")?;
                for (port, &sut_in) in &sut_ins {
                    let src = *fix_outs
                        .get(port)
                        .ok_or_else(|| SimError::UnwiredInput(format!("sut.{port}")))?;
                    b.connect(src, sut_in, "in")?;
                }
                fix_ins
            }
            None => sut_ins,
        };
        sut_ports = Some((drive, sut_outs));
    }

    let mut blocks = HashMap::new();
    for blk in &test.blocks {
        blocks.insert(
            blk.id.clone(),
            b.add(blk.id.clone(), Op::Block(blk.kind.clone()), blk.line),
        );
    }
    for w in &test.wires {
        let src = match &w.src {
            Endpoint::Block { id, .. } => blocks[id],
            Endpoint::Sut(p) => {
                let (_, outs) = sut_ports.as_ref().ok_or(SimError::NoSut)?;
                *outs
                    .get(p)
                    .ok_or_else(|| SimError::MissingPort(format!("sut.{p}")))?
            }
            Endpoint::Boundary(p) => return Err(SimError::MissingPort(p.clone())),
        };
        match &w.dst {
            Endpoint::Block { id, port } => b.connect(src, blocks[id], port)?,
            Endpoint::Sut(p) => {
                let (ins, _) = sut_ports.as_ref().ok_or(SimError::NoSut)?;
                let dst = *ins
                    .get(p)
                    .ok_or_else(|| SimError::MissingPort(format!("sut.{p}")))?;
                b.connect(src, dst, "in")?;
            }
            Endpoint::Boundary(p) => return Err(SimError::MissingPort(p.clone())),
        }
    }

    for n in &b.nodes {
        if let Some(slot) = n.inputs.iter().position(Option::is_none) {
            return Err(SimError::UnwiredInput(format!("{}.{}", n.name, n.input_names[slot])));
        }
    }
    Ok(ClosedGraph { nodes: b.nodes })
}

impl ClosedGraph {
    fn is_observed(op: &Op) -> bool {
        matches!(op, Op::Block(BlockKind::Sink | BlockKind::AssertEq { .. }))
    }

    fn is_time_invariant(&self) -> bool {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack: Vec<usize> = (0..self.nodes.len())
            .filter(|&i| Self::is_observed(&self.nodes[i].op))
            .collect();
        while let Some(i) = stack.pop() {
            if std::mem::replace(&mut seen[i], true) {
                continue;
            }
            let node = &self.nodes[i];
            if matches!(&node.op, Op::Block(k) if k.is_time_dependent()) {
                return false;
            }
            stack.extend(node.inputs.iter().flatten().copied());
        }
        true
    }

    /// Evaluation order: rounds of ready nodes, each round sorted by name.
    /// Delay outputs come from state so delays never wait on their input.
    fn schedule(&self) -> Result<Vec<usize>, SimError> {
        let n = self.nodes.len();
        let mut indegree = vec![0usize; n];
        let mut users: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, node) in self.nodes.iter().enumerate() {
            if matches!(node.op, Op::Block(BlockKind::Delay { .. })) {
                continue;
            }
            for &src in node.inputs.iter().flatten() {
                indegree[i] += 1;
                users[src].push(i);
            }
        }
        let by_name = |a: &usize, b: &usize| self.nodes[*a].name.cmp(&self.nodes[*b].name);
        let mut ready: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while !ready.is_empty() {
            ready.sort_by(by_name);
            let mut next = Vec::new();
            for &i in &ready {
                order.push(i);
                for &u in &users[i] {
                    indegree[u] -= 1;
                    if indegree[u] == 0 {
                        next.push(u);
                    }
                }
            }
            ready = next;
        }
        if order.len() < n {
            let mut stuck: Vec<String> = (0..n)
                .filter(|&i| indegree[i] > 0)
                .map(|i| self.nodes[i].name.clone())
                .collect();
            stuck.sort();
            return Err(SimError::AlgebraicLoop(stuck));
        }
        Ok(order)
    }

    fn run(&self, steps: usize) -> Result<SimTrace, SimError> {
        if steps == 0 {
            return Err(SimError::ZeroSteps);
        }
        let order = self.schedule()?;
        let mut values = vec![0.0f64; self.nodes.len()];
        let mut state: HashMap<usize, f64> = self
            .nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| match n.op {
                Op::Block(BlockKind::Delay { initial }) => Some((i, initial)),
                _ => None,
            })
            .collect();
        let mut sinks: Vec<(usize, Vec<f64>)> = Vec::new();
        let mut assertions = Vec::new();

        for step in 0..steps {
            for &i in &order {
                let node = &self.nodes[i];
                let input = |k: usize| values[node.inputs[k].expect("closed graph")];
                let out = match &node.op {
                    Op::Pass => input(0),
                    Op::Block(kind) => match kind {
                        BlockKind::Const(v) => *v,
                        BlockKind::Step { at, before, after } => {
                            if step as u64 >= *at {
                                *after
                            } else {
                                *before
                            }
                        }
                        BlockKind::Sequence(vals) => vals[step.min(vals.len() - 1)],
                        BlockKind::Clock { dt } => step as f64 * dt,
                        BlockKind::Gain(k) => k * input(0),
                        BlockKind::Sum(signs) => {
                            signs.iter().enumerate().fold(0.0, |acc, (k, s)| match s {
                                super::Sign::Plus => acc + input(k),
                                super::Sign::Minus => acc - input(k),
                            })
                        }
                        BlockKind::Product(n) => (0..*n).fold(1.0, |acc, k| acc * input(k)),
                        BlockKind::Delay { .. } => state[&i],
                        BlockKind::Saturate { lo, hi } => input(0).clamp(*lo, *hi),
                        BlockKind::Sink => {
                            let v = input(0);
                            match sinks.iter_mut().find(|(s, _)| *s == i) {
                                Some((_, series)) => series.push(v),
                                None => sinks.push((i, vec![v])),
                            }
                            continue;
                        }
                        BlockKind::AssertEq { tol } => {
                            let (actual, expected) = (input(0), input(1));
                            assertions.push(AssertionOutcome {
                                block: node.name.clone(),
                                line: node.line,
                                step,
                                actual,
                                expected,
                                passed: (actual - expected).abs() <= *tol,
                            });
                            continue;
                        }
                    },
                };
                if !out.is_finite() {
                    return Err(SimError::NonFinite {
                        block: node.name.clone(),
                        step,
                    });
                }
                values[i] = out;
            }
            for (&i, s) in state.iter_mut() {
                *s = values[self.nodes[i].inputs[0].expect("closed graph")];
            }
        }

        let mut sinks: Vec<SinkSeries> = sinks
            .into_iter()
            .map(|(i, values)| SinkSeries {
                name: self.nodes[i].name.clone(),
                values,
            })
            .collect();
        sinks.sort_by(|a, b| a.name.cmp(&b.name));
        Ok(SimTrace {
            steps,
            sinks,
            assertions,
        })
    }
}

/// True iff no step, sequence, clock or delay block feeds an assertion or
/// sink of the test's closed graph. Tests whose graph cannot be closed are
/// reported as time-dependent.
pub fn is_time_invariant(graph: &ModelGraph, test: &str) -> bool {
    close(graph, test).is_ok_and(|g| g.is_time_invariant())
}

/// Simulates one test. Time-invariant tests run a single step regardless of
/// `steps`, since every later step would repeat the first.
pub fn simulate(graph: &ModelGraph, test: &str, steps: usize) -> Result<SimTrace, SimError> {
    let closed = close(graph, test)?;
    let steps = if closed.is_time_invariant() { steps.min(1) } else { steps };
    closed.run(steps)
}

/// Simulates exactly `steps` steps with no minimization.
pub fn simulate_exact(graph: &ModelGraph, test: &str, steps: usize) -> Result<SimTrace, SimError> {
    close(graph, test)?.run(steps)
}
