//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

mod common;

use std::collections::BTreeSet;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;

use heterotest::blockmodel::{is_time_invariant, parse_model, simulate, simulate_exact};
use heterotest::ci::{CiConfig, Daemon};
use heterotest::cli::dispatch;
use heterotest::coverage::CoverageSession;
use heterotest::report::{read_results_xml, results_xml_string, ResultsDocument};
use heterotest::results::{now, SuiteResult, TestCaseResult, TestStatus};
use heterotest::rungen::{execute_manifest, generate_adapters, scan};
use heterotest::slrunner::{run_suite, run_test};
use heterotest::testdsl::{eval_expr, exec_test, parse_expr, parse_suite_source, Env, RuntimeError, Runtime, Value};

type Outcome = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn tmp() -> tempfile::TempDir {
    tempfile::tempdir().expect("tempdir")
}

fn reference_suite() -> Outcome {
    let dir = tmp();
    let file = dir.path().join("MyTestSuite.h.tsuite");
    fs::write(&file, common::MY_TEST_SUITE).unwrap();
    let suites = parse_suite_source(common::MY_TEST_SUITE, &file).map_err(|e| e.to_string())?;
    ensure!(suites.len() == 1, "expected 1 suite, got {}", suites.len());
    let runnable: Vec<_> = suites[0].runnable().collect();
    ensure!(runnable.len() == 1, "expected 1 test, got {}", runnable.len());
    let session = Arc::new(CoverageSession::new());
    session.register(&file.display().to_string(), common::MY_TEST_SUITE, &suites);
    let mut rt = Runtime::with_coverage(session.clone());
    let r = exec_test(&suites[0], runnable[0], &mut rt);
    ensure!(r.status == TestStatus::Passed, "status {:?}: {:?}", r.status, r.messages);
    let cov = session.summarize().map;
    ensure!(
        cov.executed() == 2 && cov.instrumentable() == 2,
        "both assertions must be evaluated: {}/{}",
        cov.executed(),
        cov.instrumentable()
    );
    let m = scan(&[dir.path().to_path_buf()]);
    let entries: Vec<_> = m.entries.iter().map(|e| (e.suite.as_str(), e.method.as_str())).collect();
    ensure!(entries == [("MyTestSuite", "testAddition")], "manifest {entries:?}");
    Ok(())
}

fn single_step_failure() -> Outcome {
    let text = "\
suite glitch
steps 5
test test_glitch {
 block s sequence 0 0 0 1 0
 block z const 0
 block a assert_eq
 wire s -> a.actual
 wire z -> a.expected
}
";
    let g = parse_model(text).map_err(|e| e.to_string())?;
    let trace = simulate(&g, "test_glitch", g.steps).map_err(|e| e.to_string())?;
    let failing: Vec<usize> = trace.failures().map(|f| f.step).collect();
    ensure!(failing == [3], "failing steps {failing:?}");
    let r = run_test(&g, "test_glitch");
    ensure!(r.status == TestStatus::Failed, "status {:?}", r.status);
    ensure!(r.messages.len() == 1 && r.messages[0].step == Some(3), "messages {:?}", r.messages);
    ensure!(r.messages[0].text.contains("step 3"), "text {}", r.messages[0].text);
    Ok(())
}

fn constant_minimization() -> Outcome {
    let text = "\
suite consts
steps 10
test test_ok {
 block c const 2
 block g gain 1.5
 block e const 3
 block a assert_eq
 block k sink
 wire c -> g
 wire g -> a.actual
 wire e -> a.expected
 wire g -> k
}
test test_bad {
 block c const 2
 block e const 5
 block a assert_eq
 wire c -> a.actual
 wire e -> a.expected
}
";
    let g = parse_model(text).map_err(|e| e.to_string())?;
    for t in ["test_ok", "test_bad"] {
        ensure!(is_time_invariant(&g, t), "{t} should be time-invariant");
        let short = simulate(&g, t, 10).map_err(|e| e.to_string())?;
        ensure!(short.steps == 1, "{t}: {} steps simulated", short.steps);
        ensure!(short.sinks.iter().all(|s| s.values.len() == 1), "{t}: trace length != 1");
        let full = simulate_exact(&g, t, 10).map_err(|e| e.to_string())?;
        ensure!(full.steps == 10, "{t}: exact run has {} steps", full.steps);
        ensure!(short.failed() == full.failed(), "{t}: verdicts differ");
    }
    Ok(())
}

const ISOLATION_TEST_TWO: &str = "\
test test_two {
 block c const 1
 block s sum ++
 block a assert_eq
 wire c -> s.in1
 wire s -> s.in2
 wire s -> a.actual
 wire c -> a.expected
}
";

fn isolation_model(with_two: bool) -> String {
    let one = "\
suite trio
sut {
 in u
 out y
 block g gain 2
 wire u -> g
 wire g -> y
}
test test_one {
 block c const 1
 block e const 2
 block a assert_eq
 wire c -> sut.u
 wire sut.y -> a.actual
 wire e -> a.expected
}
";
    let three = "\
test test_three {
 block c const 4
 block e const 8
 block a assert_eq
 block k sink
 wire c -> sut.u
 wire sut.y -> a.actual
 wire e -> a.expected
 wire sut.y -> k
}
";
    format!("{one}{}{three}", if with_two { ISOLATION_TEST_TWO } else { "" })
}

fn case_xml(cases: Vec<TestCaseResult>) -> String {
    let stamp = now();
    let doc = ResultsDocument {
        revision: None,
        timestamp: stamp,
        duration_ms: 0,
        suites: vec![SuiteResult {
            suite: "trio".into(),
            source_file: "trio.bdm".into(),
            started_at: stamp,
            duration_ms: 0,
            cases: cases
                .into_iter()
                .map(|mut c| {
                    c.duration_ms = 0;
                    c
                })
                .collect(),
        }],
        coverage: None,
    };
    results_xml_string(&doc)
}

fn isolation() -> Outcome {
    let dir = tmp();
    let path = dir.path().join("trio.bdm");
    fs::write(&path, isolation_model(true)).unwrap();
    let full = run_suite(&path);
    let statuses: Vec<_> = full.cases.iter().map(|c| c.status).collect();
    ensure!(
        statuses == [TestStatus::Passed, TestStatus::Error, TestStatus::Passed],
        "statuses {statuses:?}"
    );
    fs::write(&path, isolation_model(false)).unwrap();
    let reduced = run_suite(&path);
    let kept = vec![full.cases[0].clone(), full.cases[2].clone()];
    let a = case_xml(kept);
    let b = case_xml(reduced.cases);
    ensure!(a == b, "remaining results differ:\n{a}\n---\n{b}");
    Ok(())
}

fn adapter_equivalence() -> Outcome {
    let dir = tmp();
    let models = common::write_model_corpus(&dir.path().join("models"));
    let out = dir.path().join("adapters");
    let o = generate_adapters(&dir.path().join("models"), &out).map_err(|e| e.to_string())?;
    ensure!(o.written.len() == models.len(), "{} adapter files", o.written.len());
    let manifest = scan(std::slice::from_ref(&out));
    ensure!(manifest.diagnostics.is_empty(), "adapters must parse: {:?}", manifest.diagnostics);
    let mut rt = Runtime::new();
    let results = execute_manifest(&manifest, &mut rt);
    let adapted: Vec<&TestCaseResult> = results.iter().flat_map(|s| &s.cases).collect();
    let mut direct = Vec::new();
    for m in &models {
        let r = run_suite(m);
        direct.extend(r.cases.into_iter().map(|c| (format!("test_{}_{}", r.suite, c.name), c)));
    }
    ensure!(direct.len() >= 10, "corpus has {} cases", direct.len());
    ensure!(adapted.len() == direct.len(), "{} adapters for {} cases", adapted.len(), direct.len());
    let kinds: BTreeSet<_> = direct.iter().map(|(_, c)| c.status).collect();
    ensure!(kinds.len() == 3, "corpus must span all verdicts: {kinds:?}");
    for (name, d) in &direct {
        let a = adapted
            .iter()
            .find(|a| &a.name == name)
            .ok_or_else(|| format!("no adapter named {name}"))?;
        let want = match d.status {
            TestStatus::Passed => TestStatus::Passed,
            TestStatus::Failed | TestStatus::Error => TestStatus::Failed,
        };
        ensure!(a.status == want, "{}: adapter {:?}, model {:?}", a.name, a.status, d.status);
        for m in &d.messages {
            ensure!(a.output.contains(&m.text), "{}: output lacks `{}`", a.name, m.text);
        }
    }
    for m in &models {
        ensure!(rt.engine().loads_of(m) == 1, "{} loaded {} times", m.display(), rt.engine().loads_of(m));
    }
    ensure!(rt.engine().load_count() == models.len(), "load count {}", rt.engine().load_count());
    Ok(())
}

fn ci_config(dir: &Path) -> CiConfig {
    let text = "\
[component app]
location = app
role = main

[component ext]
location = ext
role = external

[notify]
recipients = dev@example.org
";
    CiConfig::parse(text, dir).unwrap()
}

fn virtual_revisions() -> Outcome {
    let dir = tmp();
    let app = dir.path().join("app");
    let ext = dir.path().join("ext");
    common::commit(&app, "1", &[("s.tsuite", common::MY_TEST_SUITE)]);
    common::commit(&ext, "1", &[("gains.bdm", common::GAINS_MODEL)]);
    let d = Daemon::new(ci_config(dir.path())).map_err(|e| e.to_string())?;
    let first = d.tick().map_err(|e| e.to_string())?;
    ensure!(first.created.as_ref().map(|v| v.vid) == Some(1), "first poll must create vid 1");
    for i in 0..3 {
        let t = d.tick().map_err(|e| e.to_string())?;
        ensure!(t.created.is_none() && t.runs.is_empty(), "unchanged poll {i} did work");
    }
    common::commit(&ext, "2", &[("gains.bdm", common::GAINS_MODEL), ("delays.bdm", common::DELAY_MODEL)]);
    let t = d.tick().map_err(|e| e.to_string())?;
    ensure!(t.created.as_ref().map(|v| v.vid) == Some(2), "external bump must create vid 2");
    ensure!(t.runs.len() == 1, "{} pipeline runs", t.runs.len());
    ensure!(t.runs[0].revisions["ext"] == "2" && t.runs[0].revisions["app"] == "1", "tuple {:?}", t.runs[0].revisions);
    let changes: [(&Path, &str); 5] = [(&app, "2"), (&ext, "3"), (&app, "3"), (&ext, "4"), (&app, "4")];
    for (i, (repo, rev)) in changes.iter().enumerate() {
        common::commit(repo, rev, &[("s.tsuite", common::MY_TEST_SUITE)]);
        if i == 2 {
            common::commit(&ext, "5", &[("gains.bdm", common::GAINS_MODEL)]);
        }
        d.tick().map_err(|e| e.to_string())?;
        d.tick().map_err(|e| e.to_string())?;
    }
    let revs = d.store.revisions().map_err(|e| e.to_string())?;
    let vids: Vec<u64> = revs.iter().map(|r| r.vid).collect();
    ensure!(vids == (1..=7).collect::<Vec<_>>(), "vids {vids:?}");
    for r in &revs {
        ensure!(d.store.load_run(r.vid).is_some(), "vid {} has no pipeline run", r.vid);
    }
    Ok(())
}

const FAILING_SUITE: &str = "\
class Arith : public CxxTest::TestSuite
{
public:
    void testSum()
    {
        int a = 2;
        int b = 3;
        TS_ASSERT_EQUALS(a + b, 6);
        TS_ASSERT(a < b);
    }

    void testOk()
    {
        TS_ASSERT(true);
    }
};
";

fn report_tree() -> Outcome {
    let dir = tmp();
    let src = dir.path().join("src");
    fs::create_dir(&src).unwrap();
    fs::write(src.join("a_my.tsuite"), common::MY_TEST_SUITE).unwrap();
    fs::write(src.join("b_arith.tsuite"), FAILING_SUITE).unwrap();
    let manifest = dir.path().join("runner.manifest");
    let code = dispatch(["heterotest", "gen", "--src", &src.display().to_string(), "-o", &manifest.display().to_string()]);
    ensure!(code == 0, "gen exit {code}");
    let out = dir.path().join("report");
    let code = dispatch([
        "heterotest", "run", "--manifest", &manifest.display().to_string(), "--out", &out.display().to_string(),
        "--report-name", "nightly", "--verbosity", "2",
    ]);
    ensure!(code == 1, "run exit {code}");
    let doc = read_results_xml(&out.join("nightly_results.xml")).map_err(|e| e.to_string())?;
    ensure!(doc.suites.len() == 2, "{} suites", doc.suites.len());
    let overview = fs::read_to_string(out.join("nightly_report.html")).unwrap();
    let links = overview.matches("class=\"suite-link\"").count();
    ensure!(links == 2, "{links} suite links");
    let c = doc.counts();
    let totals = format!("<td>{}</td><td>{}</td><td>{}</td><td>{}</td>", c.total(), c.passed, c.failed, c.error);
    ensure!(overview.contains(&totals), "overview totals differ from XML counts {c:?}");
    let reached = common::crawl(&out, "nightly_report.html")?;
    ensure!(reached.len() == 3, "reachable pages {reached:?}");
    let page = fs::read_to_string(out.join("nightly_Arith.html")).unwrap();
    let hl = Regex::new(r#"<tr class="hl"><td class="ln">(\d+)</td>"#).unwrap();
    let lines: Vec<usize> = hl.captures_iter(&page).map(|c| c[1].parse().unwrap()).collect();
    ensure!(lines == [8], "highlighted lines {lines:?}");
    for n in 5..=11 {
        ensure!(page.contains(&format!("<td class=\"ln\">{n}</td>")), "fragment lacks line {n}");
    }
    ensure!(!page.contains("<td class=\"ln\">4</td>") && !page.contains("<td class=\"ln\">12</td>"), "fragment wider than 3 lines");
    Ok(())
}

fn coverage() -> Outcome {
    let dir = tmp();
    let src = dir.path().join("src");
    fs::create_dir(&src).unwrap();
    let file = src.join("cov.tsuite");
    fs::write(&file, common::COVERAGE_SUITE).unwrap();
    let manifest = dir.path().join("m.manifest");
    ensure!(dispatch(["heterotest", "gen", "--src", &src.display().to_string(), "-o", &manifest.display().to_string()]) == 0, "gen failed");
    let m = heterotest::rungen::read_manifest(&manifest).map_err(|e| e.to_string())?;
    let session = Arc::new(CoverageSession::new());
    let mut rt = Runtime::with_coverage(session.clone());
    execute_manifest(&m, &mut rt);
    let map = session.summarize().map;
    ensure!(map.files.len() == 1, "{} covered files", map.files.len());
    let f = &map.files[0];
    ensure!(f.instrumentable == BTreeSet::from(common::COVERAGE_INSTRUMENTABLE), "instrumentable {:?}", f.instrumentable);
    ensure!(f.executed == BTreeSet::from(common::COVERAGE_EXECUTED), "executed {:?}", f.executed);
    ensure!(map.percent() == 70.0, "percent {}", map.percent());

    let plain = dir.path().join("plain");
    let covered = dir.path().join("covered");
    let mf = manifest.display().to_string();
    ensure!(dispatch(["heterotest", "run", "--manifest", &mf, "--out", &plain.display().to_string()]) == 1, "plain run exit");
    ensure!(dispatch(["heterotest", "run", "--manifest", &mf, "--cover", "--out", &covered.display().to_string()]) == 1, "covered run exit");
    let a = common::mask(&fs::read_to_string(plain.join("heterotest_results.xml")).unwrap());
    let b = common::mask(&fs::read_to_string(covered.join("heterotest_results.xml")).unwrap());
    ensure!(b.contains("percent=\"70.0\""), "coverage block missing percent 70.0");
    let block = Regex::new(r"(?s)  <coverage .*</coverage>\n").unwrap();
    let stripped = block.replace(&b, "");
    ensure!(a == stripped, "results differ beyond the coverage block:\n{a}\n---\n{stripped}");
    Ok(())
}

fn report_files(dir: &Path) -> Vec<(String, String)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "xml" || x == "html"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), common::mask(&fs::read_to_string(&p).unwrap())))
        .collect();
    v.sort();
    v
}

fn determinism() -> Outcome {
    let mut trees = Vec::new();
    for _ in 0..2 {
        let dir = tmp();
        let app = dir.path().join("app");
        let ext = dir.path().join("ext");
        common::commit(&app, "7", &[("my.tsuite", common::MY_TEST_SUITE), ("arith.tsuite", FAILING_SUITE), ("cov.tsuite", common::COVERAGE_SUITE)]);
        common::commit(&ext, "3", &[("gains.bdm", common::GAINS_MODEL), ("delays.bdm", common::DELAY_MODEL)]);
        let d = Daemon::new(ci_config(dir.path())).map_err(|e| e.to_string())?;
        let t = d.tick().map_err(|e| e.to_string())?;
        ensure!(t.runs.len() == 1, "expected one pipeline run");
        let files = report_files(&d.store.report_dir(1));
        ensure!(files.len() >= 5, "only {} report files", files.len());
        trees.push((dir, files));
    }
    let (a, b) = (&trees[0].1, &trees[1].1);
    ensure!(a.len() == b.len(), "file sets differ");
    for ((na, ta), (nb, tb)) in a.iter().zip(b) {
        ensure!(na == nb, "file names differ: {na} vs {nb}");
        ensure!(ta == tb, "{na} differs between runs");
    }
    let outs: Vec<PathBuf> = (0..2).map(|i| trees[0].0.path().join(format!("cli{i}"))).collect();
    let src = trees[0].0.path().join("src");
    common::commit(&src, "x", &[]);
    fs::write(src.join("my.tsuite"), common::MY_TEST_SUITE).unwrap();
    fs::write(src.join("arith.tsuite"), FAILING_SUITE).unwrap();
    let manifest = trees[0].0.path().join("m.manifest");
    dispatch(["heterotest", "gen", "--src", &src.display().to_string(), "-o", &manifest.display().to_string()]);
    for o in &outs {
        dispatch(["heterotest", "run", "--cover", "--verbosity", "2", "--manifest", &manifest.display().to_string(), "--out", &o.display().to_string()]);
    }
    ensure!(report_files(&outs[0]) == report_files(&outs[1]), "CLI runs differ");
    Ok(())
}

// ---- oracle equivalence -------------------------------------------------

#[derive(Clone, Debug)]
enum Node {
    Const(f64),
    Gain(f64, usize),
    Sum(Vec<(bool, usize)>),
    Product(Vec<usize>),
}

fn oracle(nodes: &[Node], i: usize) -> f64 {
    match &nodes[i] {
        Node::Const(v) => *v,
        Node::Gain(k, src) => k * oracle(nodes, *src),
        Node::Sum(terms) => terms
            .iter()
            .fold(0.0, |acc, (plus, s)| if *plus { acc + oracle(nodes, *s) } else { acc - oracle(nodes, *s) }),
        Node::Product(srcs) => srcs.iter().fold(1.0, |acc, s| acc * oracle(nodes, *s)),
    }
}

fn random_graph(rng: &mut ChaCha8Rng) -> Vec<Node> {
    let n = rng.gen_range(1..=12);
    let mut nodes = Vec::with_capacity(n);
    for i in 0..n {
        let kind = if i == 0 { 0 } else { rng.gen_range(0..4) };
        let src = |rng: &mut ChaCha8Rng| rng.gen_range(0..i.max(1));
        let node = match kind {
            0 => Node::Const(rng.gen_range(-4.0..4.0)),
            1 => Node::Gain(rng.gen_range(-2.0..2.0), src(rng)),
            2 => {
                let k = rng.gen_range(1..=4);
                Node::Sum((0..k).map(|_| (rng.gen_bool(0.5), src(rng))).collect())
            }
            _ => {
                let k = rng.gen_range(1..=3);
                Node::Product((0..k).map(|_| src(rng)).collect())
            }
        };
        nodes.push(node);
    }
    nodes
}

fn graph_text(nodes: &[Node]) -> String {
    let mut t = String::from("suite rnd\nsteps 3\ntest test_rnd {\n");
    for (i, n) in nodes.iter().enumerate() {
        match n {
            Node::Const(v) => t.push_str(&format!(" block n{i} const {v:?}\n")),
            Node::Gain(k, s) => t.push_str(&format!(" block n{i} gain {k:?}\n wire n{s} -> n{i}\n")),
            Node::Sum(terms) => {
                let signs: String = terms.iter().map(|(p, _)| if *p { '+' } else { '-' }).collect();
                t.push_str(&format!(" block n{i} sum {signs}\n"));
                for (j, (_, s)) in terms.iter().enumerate() {
                    t.push_str(&format!(" wire n{s} -> n{i}.in{}\n", j + 1));
                }
            }
            Node::Product(srcs) => {
                t.push_str(&format!(" block n{i} product {}\n", srcs.len()));
                for (j, s) in srcs.iter().enumerate() {
                    t.push_str(&format!(" wire n{s} -> n{i}.in{}\n", j + 1));
                }
            }
        }
        t.push_str(&format!(" block k{i} sink\n wire n{i} -> k{i}\n"));
    }
    t.push_str(" block a assert_eq\n wire n0 -> a.actual\n wire n0 -> a.expected\n}\n");
    t
}

#[derive(Clone, Debug)]
enum Gen {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(&'static str),
    Var(&'static str),
    Neg(Box<Gen>),
    Not(Box<Gen>),
    Bin(&'static str, Box<Gen>, Box<Gen>),
}

const OPS: [&str; 12] = ["+", "-", "*", "/", "<", "<=", ">", ">=", "==", "!=", "&&", "||"];
const STRS: [&str; 3] = ["", "a", "bc"];
const VARS: [&str; 4] = ["i", "f", "b", "s"];

fn random_expr(rng: &mut ChaCha8Rng, depth: u32) -> Gen {
    if depth == 0 || rng.gen_bool(0.25) {
        return match rng.gen_range(0..10) {
            0..=3 => Gen::Int(if rng.gen_bool(0.05) { i64::MAX - rng.gen_range(0..3) } else { rng.gen_range(0..10) }),
            4..=5 => Gen::Float(rng.gen_range(0..16) as f64 / 4.0),
            6 => Gen::Bool(rng.gen_bool(0.5)),
            7 => Gen::Str(STRS[rng.gen_range(0..STRS.len())]),
            _ => Gen::Var(VARS[rng.gen_range(0..VARS.len())]),
        };
    }
    match rng.gen_range(0..10) {
        0 => Gen::Neg(Box::new(random_expr(rng, depth - 1))),
        1 => Gen::Not(Box::new(random_expr(rng, depth - 1))),
        _ => Gen::Bin(
            OPS[rng.gen_range(0..OPS.len())],
            Box::new(random_expr(rng, depth - 1)),
            Box::new(random_expr(rng, depth - 1)),
        ),
    }
}

fn render(e: &Gen) -> String {
    match e {
        Gen::Int(i) => i.to_string(),
        Gen::Float(x) => format!("{x:?}"),
        Gen::Bool(b) => b.to_string(),
        Gen::Str(s) => format!("\"{s}\""),
        Gen::Var(v) => v.to_string(),
        Gen::Neg(x) => format!("(-{})", render(x)),
        Gen::Not(x) => format!("(!{})", render(x)),
        Gen::Bin(op, l, r) => format!("({} {op} {})", render(l), render(r)),
    }
}

#[derive(Clone, Debug, PartialEq)]
enum RV {
    I(i64),
    F(f64),
    B(bool),
    S(String),
}

#[derive(Debug, PartialEq)]
enum Fault {
    DivZero,
    Overflow,
    Type,
}

fn num(v: &RV) -> Option<f64> {
    match v {
        RV::I(i) => Some(*i as f64),
        RV::F(x) => Some(*x),
        _ => None,
    }
}

fn reference(e: &Gen) -> Result<RV, Fault> {
    let boolean = |v: RV| match v {
        RV::B(b) => Ok(b),
        _ => Err(Fault::Type),
    };
    Ok(match e {
        Gen::Int(i) => RV::I(*i),
        Gen::Float(x) => RV::F(*x),
        Gen::Bool(b) => RV::B(*b),
        Gen::Str(s) => RV::S(s.to_string()),
        Gen::Var("i") => RV::I(7),
        Gen::Var("f") => RV::F(0.5),
        Gen::Var("b") => RV::B(true),
        Gen::Var(_) => RV::S("x".into()),
        Gen::Neg(x) => match reference(x)? {
            RV::I(i) => RV::I(i.checked_neg().ok_or(Fault::Overflow)?),
            RV::F(f) => RV::F(-f),
            _ => return Err(Fault::Type),
        },
        Gen::Not(x) => RV::B(!boolean(reference(x)?)?),
        Gen::Bin("&&", l, r) => RV::B(boolean(reference(l)?)? && boolean(reference(r)?)?),
        Gen::Bin("||", l, r) => RV::B(boolean(reference(l)?)? || boolean(reference(r)?)?),
        Gen::Bin(op, l, r) => {
            let (a, b) = (reference(l)?, reference(r)?);
            match *op {
                "==" | "!=" => {
                    let eq = match (&a, &b) {
                        (RV::I(x), RV::I(y)) => x == y,
                        (RV::B(x), RV::B(y)) => x == y,
                        (RV::S(x), RV::S(y)) => x == y,
                        _ => num(&a).zip(num(&b)).map(|(x, y)| x == y).ok_or(Fault::Type)?,
                    };
                    RV::B(if *op == "==" { eq } else { !eq })
                }
                "<" | "<=" | ">" | ">=" => {
                    let (x, y) = match (&a, &b) {
                        (RV::I(x), RV::I(y)) => {
                            let c = x.cmp(y);
                            return Ok(RV::B(match *op {
                                "<" => c.is_lt(),
                                "<=" => c.is_le(),
                                ">" => c.is_gt(),
                                _ => c.is_ge(),
                            }));
                        }
                        _ => num(&a).zip(num(&b)).ok_or(Fault::Type)?,
                    };
                    RV::B(match *op {
                        "<" => x < y,
                        "<=" => x <= y,
                        ">" => x > y,
                        _ => x >= y,
                    })
                }
                _ => match (&a, &b) {
                    (RV::I(x), RV::I(y)) => RV::I(match *op {
                        "+" => x.checked_add(*y).ok_or(Fault::Overflow)?,
                        "-" => x.checked_sub(*y).ok_or(Fault::Overflow)?,
                        "*" => x.checked_mul(*y).ok_or(Fault::Overflow)?,
                        _ if *y == 0 => return Err(Fault::DivZero),
                        _ => x.checked_div(*y).ok_or(Fault::Overflow)?,
                    }),
                    (RV::S(x), RV::S(y)) if *op == "+" => RV::S(format!("{x}{y}")),
                    _ => {
                        let (x, y) = num(&a).zip(num(&b)).ok_or(Fault::Type)?;
                        RV::F(match *op {
                            "+" => x + y,
                            "-" => x - y,
                            "*" => x * y,
                            _ if y == 0.0 => return Err(Fault::DivZero),
                            _ => x / y,
                        })
                    }
                },
            }
        }
    })
}

fn same(interp: &Result<Value, RuntimeError>, want: &Result<RV, Fault>) -> bool {
    match (interp, want) {
        (Ok(Value::Int(a)), Ok(RV::I(b))) => a == b,
        (Ok(Value::Float(a)), Ok(RV::F(b))) => a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()),
        (Ok(Value::Bool(a)), Ok(RV::B(b))) => a == b,
        (Ok(Value::Str(a)), Ok(RV::S(b))) => a == b,
        (Err(RuntimeError::DivisionByZero), Err(Fault::DivZero)) => true,
        (Err(RuntimeError::IntegerOverflow), Err(Fault::Overflow)) => true,
        (Err(RuntimeError::TypeMismatch(_)), Err(Fault::Type)) => true,
        _ => false,
    }
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_2011);
    for g in 0..200 {
        let nodes = random_graph(&mut rng);
        let text = graph_text(&nodes);
        let model = parse_model(&text).map_err(|e| format!("graph {g}: {e}\n{text}"))?;
        let trace = simulate_exact(&model, "test_rnd", 3).map_err(|e| format!("graph {g}: {e}"))?;
        for (i, _) in nodes.iter().enumerate() {
            let want = oracle(&nodes, i);
            let series = trace
                .sinks
                .iter()
                .find(|s| s.name == format!("k{i}"))
                .ok_or_else(|| format!("graph {g}: sink k{i} missing"))?;
            for v in &series.values {
                ensure!((v - want).abs() <= 1e-12 * want.abs().max(1.0), "graph {g} node {i}: {v} vs {want}\n{text}");
            }
        }
    }
    let mut env = Env::new();
    env.insert("i".into(), Value::Int(7));
    env.insert("f".into(), Value::Float(0.5));
    env.insert("b".into(), Value::Bool(true));
    env.insert("s".into(), Value::Str("x".into()));
    let mut kinds = BTreeSet::new();
    for k in 0..500 {
        let depth = rng.gen_range(1..=6);
        let e = random_expr(&mut rng, depth);
        let src = render(&e);
        let parsed = parse_expr(&src).map_err(|err| format!("expr {k}: `{src}`: {err}"))?;
        let got = eval_expr(&parsed, &env);
        let want = reference(&e);
        ensure!(same(&got, &want), "expr {k}: `{src}`: interpreter {got:?}, reference {want:?}");
        kinds.insert(match &want {
            Ok(_) => "ok",
            Err(_) => "fault",
        });
    }
    ensure!(kinds.len() == 2, "expression sample lacks variety: {kinds:?}");
    ensure!(start.elapsed().as_secs() < 30, "took {:?}", start.elapsed());
    Ok(())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("reference suite", reference_suite),
        ("single-time-step failure", single_step_failure),
        ("constant-model minimization", constant_minimization),
        ("test isolation", isolation),
        ("adapter equivalence", adapter_equivalence),
        ("virtual revisions", virtual_revisions),
        ("report tree", report_tree),
        ("coverage", coverage),
        ("determinism", determinism),
        ("oracle equivalence", oracle_equivalence),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let ms = start.elapsed().as_millis();
        match outcome {
            Ok(()) => println!("PASS {:>2}. {name} ({ms} ms)", i + 1),
            Err(e) => {
                failed += 1;
                println!("FAIL {:>2}. {name} ({ms} ms): {e}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
