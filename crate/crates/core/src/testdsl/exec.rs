use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use super::ast::{StmtKind, SuiteDecl, TestMethod, TypeName};
use super::eval::{eval_with, truthy, values_equal, Env, Host, RuntimeError, Value};
use crate::blockmodel::{parse_model_file, resolve_sut, ModelGraph, ResolveError};
use crate::coverage::CoverageSession;
use crate::results::{elapsed_ms, Message, TestCaseResult, TestStatus};
use crate::slrunner::{resolution_failure, run_test, search_path};

struct LoadedSuite {
    graph: ModelGraph,
    resolve_error: Option<ResolveError>,
}

/// Outcome of running one model test through the engine.
#[derive(Debug, Clone, PartialEq)]
pub struct SlunitRecord {
    pub status: TestStatus,
    /// Failure and error messages, one per line; empty when passed.
    pub output: String,
    pub result: Option<TestCaseResult>,
}

/// The model engine shared by all DSL tests of one runner execution. Each
/// model file is parsed at most once; later calls hit the cache.
pub struct ModelEngine {
    cache: HashMap<PathBuf, Result<LoadedSuite, String>>,
    loads: HashMap<PathBuf, usize>,
}

impl ModelEngine {
    pub fn start() -> Self {
        log::debug!("model engine started");
        ModelEngine {
            cache: HashMap::new(),
            loads: HashMap::new(),
        }
    }

    /// Total number of model files parsed by this engine.
    pub fn load_count(&self) -> usize {
        self.loads.values().sum()
    }

    pub fn loads_of(&self, path: &Path) -> usize {
        self.loads.get(&key(path)).copied().unwrap_or(0)
    }

    fn suite(&mut self, path: &Path) -> &Result<LoadedSuite, String> {
        let k = key(path);
        if !self.cache.contains_key(&k) {
            *self.loads.entry(k.clone()).or_default() += 1;
            let loaded = if !path.is_file() {
                Err(format!("suite `{}` not found", path.display()))
            } else {
                parse_model_file(path)
                    .map(|graph| {
                        let search = search_path(path);
                        match resolve_sut(&graph, &search) {
                            Ok(graph) => LoadedSuite {
                                graph,
                                resolve_error: None,
                            },
                            Err(e) => LoadedSuite {
                                graph,
                                resolve_error: Some(e),
                            },
                        }
                    })
                    .map_err(|e| format!("cannot load suite `{}`: {e}", path.display()))
            };
            self.cache.insert(k.clone(), loaded);
        }
        &self.cache[&k]
    }

    /// Runs a single model test case.
    pub fn run(&mut self, suite_path: &Path, test: &str) -> SlunitRecord {
        let error = |output: String| SlunitRecord {
            status: TestStatus::Error,
            output,
            result: None,
        };
        let loaded = match self.suite(suite_path) {
            Ok(l) => l,
            Err(e) => return error(e.clone()),
        };
        let graph = &loaded.graph;
        let Some(t) = graph.test(test) else {
            return error(format!("test `{test}` not found in suite `{}`", graph.suite_name));
        };
        let result = match &loaded.resolve_error {
            Some(e) if t.uses_sut() => resolution_failure(graph, test, e),
            _ => run_test(graph, test),
        };
        let output = result
            .messages
            .iter()
            .map(|m| m.text.as_str())
            .collect::<Vec<_>>()
            .join("\n");
        SlunitRecord {
            status: result.status,
            output,
            result: Some(result),
        }
    }
}

fn key(path: &Path) -> PathBuf {
    path.canonicalize().unwrap_or_else(|_| path.to_path_buf())
}

/// Interpreter state for one runner execution: the model engine, started
/// once before the first test, and an optional coverage session.
pub struct Runtime {
    engine: ModelEngine,
    coverage: Option<Arc<CoverageSession>>,
}

impl Default for Runtime {
    fn default() -> Self {
        Self::new()
    }
}

impl Runtime {
    pub fn new() -> Self {
        Runtime {
            engine: ModelEngine::start(),
            coverage: None,
        }
    }

    pub fn with_coverage(session: Arc<CoverageSession>) -> Self {
        Runtime {
            engine: ModelEngine::start(),
            coverage: Some(session),
        }
    }

    pub fn engine(&self) -> &ModelEngine {
        &self.engine
    }

    pub fn coverage(&self) -> Option<&Arc<CoverageSession>> {
        self.coverage.as_ref()
    }
}

struct Builtins<'a> {
    engine: &'a mut ModelEngine,
    base_dir: PathBuf,
    output: &'a mut String,
}

impl Host for Builtins<'_> {
    fn call(&mut self, name: &str, args: Vec<Value>) -> Result<Value, RuntimeError> {
        let arity = |expected: usize| -> Result<(), RuntimeError> {
            if args.len() == expected {
                Ok(())
            } else {
                Err(RuntimeError::Arity {
                    name: name.to_string(),
                    expected,
                    got: args.len(),
                })
            }
        };
        match name {
            "print" => {
                arity(1)?;
                self.output.push_str(&args[0].to_string());
                self.output.push('\n');
                Ok(args.into_iter().next().expect("one argument"))
            }
            "slunit_run" => {
                arity(2)?;
                let (Value::Str(suite), Value::Str(test)) = (&args[0], &args[1]) else {
                    return Err(RuntimeError::TypeMismatch(
                        "slunit_run expects (string, string)".into(),
                    ));
                };
                let path = self.base_dir.join(suite);
                let rec = self.engine.run(&path, test);
                self.output
                    .push_str(&format!("[slunit] {suite}#{test}: {}\n", rec.status));
                for line in rec.output.lines() {
                    self.output.push_str(line);
                    self.output.push('\n');
                }
                Ok(Value::Status {
                    status: rec.status.code(),
                    output: rec.output,
                })
            }
            other => Err(RuntimeError::UnknownFunction(other.to_string())),
        }
    }
}

enum Abort {
    Failed(String),
    Fault(RuntimeError),
}

impl From<RuntimeError> for Abort {
    fn from(e: RuntimeError) -> Self {
        Abort::Fault(e)
    }
}

fn declare(ty: TypeName, v: Value) -> Result<Value, RuntimeError> {
    match (ty, v) {
        (TypeName::Auto, v) => Ok(v),
        (TypeName::Int, v @ Value::Int(_)) => Ok(v),
        (TypeName::Double, Value::Int(i)) => Ok(Value::Float(i as f64)),
        (TypeName::Double, v @ Value::Float(_)) => Ok(v),
        (TypeName::Bool, v @ Value::Bool(_)) => Ok(v),
        (TypeName::String, v @ Value::Str(_)) => Ok(v),
        (ty, v) => Err(RuntimeError::TypeMismatch(format!(
            "cannot initialize {} with {}",
            ty.keyword(),
            v.type_name()
        ))),
    }
}

fn number(v: &Value, what: &str) -> Result<f64, RuntimeError> {
    match v {
        Value::Int(i) => Ok(*i as f64),
        Value::Float(x) => Ok(*x),
        other => Err(RuntimeError::TypeMismatch(format!(
            "{what} must be numeric, found {}",
            other.type_name()
        ))),
    }
}

/// Runs one test method. Statements run in order; the first failed
/// assertion aborts the method. Runtime faults produce an `error` result.
pub fn exec_test(suite: &SuiteDecl, method: &TestMethod, rt: &mut Runtime) -> TestCaseResult {
    let start = Instant::now();
    let file = suite.source_file.clone();
    let base_dir = Path::new(&file)
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let mut output = String::new();
    let mut env = Env::new();
    let mut outcome = None;
    {
        let mut host = Builtins {
            engine: &mut rt.engine,
            base_dir,
            output: &mut output,
        };
        for stmt in &method.body {
            if let Some(cov) = &rt.coverage {
                cov.record(&file, stmt.line);
            }
            let res: Result<(), Abort> = (|| {
                let mut ev = |e| eval_with(e, &env, &mut host);
                match &stmt.kind {
                    StmtKind::Decl { ty, name, init } => {
                        let v = declare(*ty, ev(init)?)?;
                        if env.contains_key(name) {
                            return Err(RuntimeError::Redeclared(name.clone()).into());
                        }
                        env.insert(name.clone(), v);
                    }
                    StmtKind::Expr(e) => {
                        ev(e)?;
                    }
                    StmtKind::Assert(e) => {
                        let v = ev(e)?;
                        if !truthy(&v)? {
                            return Err(Abort::Failed(format!("TS_ASSERT({e}) failed: {e} is {}", v.repr())));
                        }
                    }
                    StmtKind::AssertEquals(a, b) => {
                        let (va, vb) = (ev(a)?, ev(b)?);
                        if !values_equal(&va, &vb)? {
                            return Err(Abort::Failed(format!(
                                "TS_ASSERT_EQUALS({a}, {b}) failed: {} != {}",
                                va.repr(),
                                vb.repr()
                            )));
                        }
                    }
                    StmtKind::AssertDelta(a, b, t) => {
                        let (va, vb, vt) = (ev(a)?, ev(b)?, ev(t)?);
                        let diff = (number(&va, "TS_ASSERT_DELTA operand")?
                            - number(&vb, "TS_ASSERT_DELTA operand")?)
                        .abs();
                        let tol = number(&vt, "TS_ASSERT_DELTA tolerance")?;
                        if !(diff <= tol) {
                            return Err(Abort::Failed(format!(
                                "TS_ASSERT_DELTA({a}, {b}, {t}) failed: |{} - {}| = {diff:?} > {}",
                                va.repr(),
                                vb.repr(),
                                vt.repr()
                            )));
                        }
                    }
                    StmtKind::Fail(e) => {
                        let v = ev(e)?;
                        return Err(Abort::Failed(format!("TS_FAIL: {v}")));
                    }
                }
                Ok(())
            })();
            match res {
                Ok(()) => {}
                Err(Abort::Failed(text)) => {
                    outcome = Some((TestStatus::Failed, format!("line {}: {text}", stmt.line), stmt.line));
                    break;
                }
                Err(Abort::Fault(e)) => {
                    outcome = Some((TestStatus::Error, format!("line {}: {e}", stmt.line), stmt.line));
                    break;
                }
            }
        }
    }
    let mut result = match outcome {
        None => TestCaseResult::passed(&method.name),
        Some((status, text, line)) => {
            let m = Message::new(text).at_line(file, line);
            match status {
                TestStatus::Failed => TestCaseResult::failed(&method.name, vec![m]),
                _ => TestCaseResult::error(&method.name, m),
            }
        }
    };
    result.output = output;
    result.duration_ms = elapsed_ms(start);
    result
}
