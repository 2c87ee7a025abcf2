//! Unit-test harness for model suites: discovery, isolated execution of each
//! test case, suite aggregation and the batch test runner.

use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::blockmodel::{parse_model_file, resolve_sut, simulate, ModelGraph, ResolveError};
use crate::report::{self, ResultsDocument};
use crate::results::{elapsed_ms, now, total_counts, Counts, Message, SuiteResult, TestCaseResult};

pub use crate::results::TestStatus;

/// Synthetic case name used when a whole suite could not be loaded.
pub const LOAD_CASE: &str = "load_suite";
/// Synthetic case name used when a valid suite contains no tests.
pub const DISCOVER_CASE: &str = "discover_tests";

pub fn discover_tests(graph: &ModelGraph) -> Vec<String> {
    graph.tests().map(|t| t.name.clone()).collect()
}

/// Runs one test case. Faults never escape: they become `error` results.
pub fn run_test(graph: &ModelGraph, test: &str) -> TestCaseResult {
    let start = Instant::now();
    let file = graph.source.as_ref().map(|p| p.display().to_string());
    let mut result = match simulate(graph, test, graph.steps) {
        Ok(trace) => {
            let mut messages = Vec::new();
            let mut reported: Vec<&str> = Vec::new();
            for f in trace.failures() {
                if reported.contains(&f.block.as_str()) {
                    continue;
                }
                reported.push(&f.block);
                let count = trace.failures().filter(|o| o.block == f.block).count();
                let mut m = Message::new(format!(
                    "assert `{}` failed at step {} ({} of {} steps): actual {}, expected {}",
                    f.block, f.step, count, trace.steps, f.actual, f.expected
                ));
                m.block = Some(f.block.clone());
                m.step = Some(f.step);
                if !f.block.contains('/') {
                    m.file = file.clone();
                    m.line = Some(f.line);
                }
                messages.push(m);
            }
            let mut r = if messages.is_empty() {
                TestCaseResult::passed(test)
            } else {
                TestCaseResult::failed(test, messages)
            };
            r.trace = trace.sinks;
            r
        }
        Err(e) => {
            let mut m = Message::new(format!("error: {e}"));
            if let Some(t) = graph.test(test) {
                m.file = file.clone();
                m.line = Some(t.line);
            }
            TestCaseResult::error(test, m)
        }
    };
    result.duration_ms = elapsed_ms(start);
    result
}

pub(crate) fn synthetic_error(suite: String, file: &Path, case: &str, text: String) -> SuiteResult {
    SuiteResult {
        suite,
        source_file: file.display().to_string(),
        started_at: now(),
        duration_ms: 0,
        cases: vec![TestCaseResult::error(case, Message::new(text))],
    }
}

pub(crate) fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Runs every test of a model file, each in isolation.
pub fn run_suite(path: &Path) -> SuiteResult {
    let started_at = now();
    let start = Instant::now();
    let graph = match parse_model_file(path) {
        Ok(g) => g,
        Err(e) => {
            return synthetic_error(
                stem(path),
                path,
                LOAD_CASE,
                format!("cannot load {}: {e}", path.display()),
            )
        }
    };
    let tests = discover_tests(&graph);
    if tests.is_empty() {
        return synthetic_error(graph.suite_name, path, DISCOVER_CASE, "no tests discovered".into());
    }
    let search = search_path(path);
    let (graph, resolve_error) = match resolve_sut(&graph, &search) {
        Ok(g) => (g, None),
        Err(e) => (graph, Some(e)),
    };
    let cases = tests
        .iter()
        .map(|name| match &resolve_error {
            Some(e) if graph.test(name).is_some_and(|t| t.uses_sut()) => {
                resolution_failure(&graph, name, e)
            }
            _ => run_test(&graph, name),
        })
        .collect();
    SuiteResult {
        suite: graph.suite_name.clone(),
        source_file: path.display().to_string(),
        started_at,
        duration_ms: elapsed_ms(start),
        cases,
    }
}

pub(crate) fn search_path(model_file: &Path) -> Vec<PathBuf> {
    vec![model_file
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))]
}

pub(crate) fn resolution_failure(graph: &ModelGraph, test: &str, e: &ResolveError) -> TestCaseResult {
    let mut m = Message::new(format!("error: {e}"));
    if let (Some(src), Some(t)) = (&graph.source, graph.test(test)) {
        m = m.at_line(src.display().to_string(), t.line);
    }
    TestCaseResult::error(test, m)
}

/// Arguments of the batch runner: where suites live, which to run, the
/// report base name and how detailed the report is.
#[derive(Debug, Clone)]
pub struct RunnerConfig {
    pub testpath: PathBuf,
    pub testsuites: Vec<String>,
    pub report_name: String,
    pub verbosity: u32,
    /// Where report files go; `testpath` when unset.
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub document: ResultsDocument,
    pub files: Vec<PathBuf>,
}

impl RunSummary {
    pub fn counts(&self) -> Counts {
        total_counts(&self.document.suites)
    }

    /// Suites with at least one errored case.
    pub fn errored_suites(&self) -> usize {
        self.document
            .suites
            .iter()
            .filter(|s| s.counts().error > 0)
            .count()
    }

    pub fn exit_code(&self) -> i32 {
        self.counts().exit_code()
    }
}

/// Runs each named suite from `<testpath>/<name>.bdm` and writes the results
/// XML plus the HTML report tree. Suites run concurrently; the report lists
/// them in configuration order.
pub fn slunit_testrunner(config: &RunnerConfig) -> io::Result<RunSummary> {
    if config.testsuites.is_empty() {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "no test suites given"));
    }
    let started = now();
    let start = Instant::now();
    let suites: Vec<SuiteResult> = config
        .testsuites
        .par_iter()
        .map(|name| {
            let path = config.testpath.join(format!("{name}.bdm"));
            if path.is_file() {
                let mut r = run_suite(&path);
                if r.cases.len() == 1 && r.cases[0].name == LOAD_CASE {
                    r.suite = name.clone();
                }
                r
            } else {
                synthetic_error(
                    name.clone(),
                    &path,
                    LOAD_CASE,
                    format!("suite file {} not found", path.display()),
                )
            }
        })
        .collect();
    let document = ResultsDocument {
        revision: None,
        timestamp: started,
        duration_ms: elapsed_ms(start),
        suites,
        coverage: None,
    };
    let out_dir = config.out_dir.as_deref().unwrap_or(&config.testpath);
    let files = report::publish(&document, &config.report_name, config.verbosity, out_dir)?;
    Ok(RunSummary { document, files })
}
