mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;

use proptest::prelude::*;

use heterotest::blockmodel::{is_time_invariant, parse_model, simulate, simulate_exact};
use heterotest::ci::Store;
use heterotest::coverage::{percentage, CoverageMap, FileCoverage};
use heterotest::report::{read_results_str, results_xml_string, ResultsDocument};
use heterotest::results::{now, Message, SuiteResult, TestCaseResult, TestStatus};
use heterotest::rungen::{adapter_names, adapter_source, AdapterSpec};
use heterotest::slrunner::run_suite;
use heterotest::testdsl::{parse_expr, parse_suite_file, BinOp, Expr, UnOp};

// ---- model generators ---------------------------------------------------

#[derive(Debug, Clone)]
enum Blk {
    Const(i8),
    Gain(i8, usize),
    Sum(Vec<(bool, usize)>),
    Product(Vec<usize>),
}

fn arb_graph() -> impl Strategy<Value = Vec<Blk>> {
    (1usize..10).prop_flat_map(|n| {
        let blocks: Vec<BoxedStrategy<Blk>> = (0..n)
            .map(|i| {
                if i == 0 {
                    any::<i8>().prop_map(Blk::Const).boxed()
                } else {
                    prop_oneof![
                        any::<i8>().prop_map(Blk::Const),
                        (any::<i8>(), 0..i).prop_map(|(k, s)| Blk::Gain(k, s)),
                        prop::collection::vec((any::<bool>(), 0..i), 1..4).prop_map(Blk::Sum),
                        prop::collection::vec(0..i, 1..3).prop_map(Blk::Product),
                    ]
                    .boxed()
                }
            })
            .collect();
        blocks
    })
}

/// A test whose sinks record every block; `unit_gain` inserts a gain of 1.0
/// in front of every sink. `expected` feeds the assertion's expected port.
fn model_text(blocks: &[Blk], unit_gain: bool, expected: f64) -> String {
    let mut t = String::from("suite g\nsteps 4\ntest test_g {\n");
    for (i, b) in blocks.iter().enumerate() {
        match b {
            Blk::Const(v) => t += &format!(" block n{i} const {v}\n"),
            Blk::Gain(k, s) => t += &format!(" block n{i} gain {}\n wire n{s} -> n{i}\n", *k as f64 / 8.0),
            Blk::Sum(terms) => {
                let signs: String = terms.iter().map(|(p, _)| if *p { '+' } else { '-' }).collect();
                t += &format!(" block n{i} sum {signs}\n");
                for (j, (_, s)) in terms.iter().enumerate() {
                    t += &format!(" wire n{s} -> n{i}.in{}\n", j + 1);
                }
            }
            Blk::Product(srcs) => {
                t += &format!(" block n{i} product {}\n", srcs.len());
                for (j, s) in srcs.iter().enumerate() {
                    t += &format!(" wire n{s} -> n{i}.in{}\n", j + 1);
                }
            }
        }
        if unit_gain {
            t += &format!(" block u{i} gain 1.0\n wire n{i} -> u{i}\n block k{i} sink\n wire u{i} -> k{i}\n");
        } else {
            t += &format!(" block k{i} sink\n wire n{i} -> k{i}\n");
        }
    }
    let last = blocks.len() - 1;
    t += &format!(" block e const {expected:?}\n block a assert_eq\n wire n{last} -> a.actual\n wire e -> a.expected\n}}\n");
    t
}

fn sink_values(text: &str) -> BTreeMap<String, Vec<f64>> {
    let g = parse_model(text).unwrap();
    simulate_exact(&g, "test_g", 4)
        .unwrap()
        .sinks
        .into_iter()
        .map(|s| (s.name, s.values))
        .collect()
}

// ---- expression generators ----------------------------------------------

const NAMES: [&str; 4] = ["x", "y", "rate", "n2"];
const BINOPS: [BinOp; 12] = [
    BinOp::Or,
    BinOp::And,
    BinOp::Eq,
    BinOp::Ne,
    BinOp::Lt,
    BinOp::Le,
    BinOp::Gt,
    BinOp::Ge,
    BinOp::Add,
    BinOp::Sub,
    BinOp::Mul,
    BinOp::Div,
];

fn arb_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0i64..1_000_000).prop_map(Expr::Int),
        (0.0f64..1e9).prop_map(Expr::Float),
        any::<bool>().prop_map(Expr::Bool),
        "[a-z \"\\\\]{0,6}".prop_map(Expr::Str),
        prop::sample::select(&NAMES[..]).prop_map(|n| Expr::Var(n.to_string())),
    ];
    leaf.prop_recursive(6, 64, 3, |inner| {
        prop_oneof![
            (prop::sample::select(&BINOPS[..]), inner.clone(), inner.clone()).prop_map(|(op, l, r)| Expr::binary(op, l, r)),
            (prop_oneof![Just(UnOp::Neg), Just(UnOp::Not)], inner.clone()).prop_map(|(op, e)| Expr::unary(op, e)),
            (inner.clone(), prop_oneof![Just("status"), Just("output")]).prop_map(|(e, f)| Expr::Field(Box::new(e), f.to_string())),
            prop::collection::vec(inner, 0..3).prop_map(|args| Expr::Call("slunit_run".into(), args)),
        ]
    })
}

// ---- results documents --------------------------------------------------

fn arb_case() -> impl Strategy<Value = TestCaseResult> {
    (
        "test[A-Za-z0-9_]{0,8}",
        0u8..3,
        0u64..1000,
        "[ -~\n\t]{0,20}",
        prop::option::of(1usize..500),
        prop::collection::vec(-1e6f64..1e6, 0..4),
    )
        .prop_map(|(name, status, duration, text, line, values)| {
            let mut m = Message::new(text.clone());
            if let Some(l) = line {
                m = m.at_line("dir/a&b.tsuite", l);
            }
            let mut c = match status {
                0 => TestCaseResult::passed(name),
                1 => TestCaseResult::failed(name, vec![m]),
                _ => TestCaseResult::error(name, m),
            };
            c.duration_ms = duration;
            c.output = text;
            if !values.is_empty() {
                c.trace = vec![heterotest::blockmodel::SinkSeries {
                    name: "k<1>".into(),
                    values,
                }];
            }
            c
        })
}

fn arb_doc() -> impl Strategy<Value = ResultsDocument> {
    (
        prop::option::of(1u64..100),
        prop::collection::vec(("[A-Za-z_]{1,8}", prop::collection::vec(arb_case(), 0..4)), 0..3),
        prop::option::of(prop::collection::vec((1usize..40, any::<bool>()), 0..20)),
    )
        .prop_map(|(revision, suites, cov)| {
            let stamp = now();
            ResultsDocument {
                revision,
                timestamp: stamp,
                duration_ms: 3,
                suites: suites
                    .into_iter()
                    .map(|(suite, cases)| SuiteResult {
                        source_file: format!("{suite}.tsuite"),
                        suite,
                        started_at: stamp,
                        duration_ms: 1,
                        cases,
                    })
                    .collect(),
                coverage: cov.map(|lines| CoverageMap {
                    files: vec![FileCoverage {
                        name: "x.tsuite".into(),
                        instrumentable: lines.iter().map(|(l, _)| *l).collect(),
                        executed: lines.iter().filter(|(_, e)| *e).map(|(l, _)| *l).collect(),
                    }],
                }),
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn minimized_verdict_matches_full_horizon(blocks in arb_graph(), expected in -3i8..3) {
        let text = model_text(&blocks, false, expected as f64);
        let g = parse_model(&text).unwrap();
        prop_assert!(is_time_invariant(&g, "test_g"));
        match (simulate(&g, "test_g", 10), simulate_exact(&g, "test_g", 10)) {
            (Ok(short), Ok(full)) => {
                prop_assert_eq!(short.steps, 1);
                prop_assert_eq!(short.failed(), full.failed());
            }
            (Err(a), Err(b)) => prop_assert_eq!(a.to_string(), b.to_string()),
            (a, b) => prop_assert!(false, "{:?} vs {:?}", a.is_ok(), b.is_ok()),
        }
    }

    #[test]
    fn unit_gain_insertion_preserves_sinks(blocks in arb_graph()) {
        let plain = model_text(&blocks, false, 0.0);
        let gained = model_text(&blocks, true, 0.0);
        let g = parse_model(&plain).unwrap();
        prop_assume!(simulate_exact(&g, "test_g", 4).is_ok());
        prop_assert_eq!(sink_values(&plain), sink_values(&gained));
    }

    #[test]
    fn expression_print_parse_round_trip(e in arb_expr()) {
        let printed = e.to_string();
        let back = parse_expr(&printed).map_err(|err| TestCaseError::fail(format!("`{printed}`: {err}")))?;
        prop_assert_eq!(back, e, "printed as `{}`", printed);
    }

    #[test]
    fn adapters_always_parse(
        suite in "[A-Za-z_][A-Za-z0-9_]{0,10}",
        cases in prop::collection::vec("test[A-Za-z0-9_]{0,8}", 0..6),
        path in "[a-z/._ -]{1,20}",
    ) {
        let names = adapter_names(&suite, &cases);
        let unique: BTreeSet<_> = names.iter().collect();
        prop_assert_eq!(unique.len(), names.len());
        let specs: Vec<AdapterSpec> = names.iter().zip(&cases).map(|(m, c)| AdapterSpec {
            model_suite: path.clone().into(),
            test_case: c.clone(),
            adapter_method: m.clone(),
        }).collect();
        let src = adapter_source(&suite, &path, &specs);
        let parsed = parse_suite_file(&src).map_err(|e| TestCaseError::fail(format!("{e}\n{src}")))?;
        prop_assert_eq!(parsed.len(), 1);
        let methods: Vec<_> = parsed[0].runnable().map(|m| m.name.clone()).collect();
        prop_assert_eq!(methods, names);
    }

    #[test]
    fn results_xml_round_trip(doc in arb_doc()) {
        let x = results_xml_string(&doc);
        let (back, warnings) = read_results_str(&x).map_err(|e| TestCaseError::fail(format!("{e}\n{x}")))?;
        prop_assert!(warnings.is_empty());
        prop_assert_eq!(&back, &doc);
        prop_assert_eq!(results_xml_string(&back), x);
    }

    #[test]
    fn coverage_percent_is_bounded_and_monotone(instr in 1usize..200, a in 0usize..200, b in 0usize..200) {
        let (lo, hi) = (a.min(b).min(instr), a.max(b).min(instr));
        let (p, q) = (percentage(lo, instr), percentage(hi, instr));
        prop_assert!((0.0..=100.0).contains(&p) && p <= q);
        prop_assert_eq!(percentage(instr, instr), 100.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn suite_results_do_not_depend_on_test_order(order in Just((0..5usize).collect::<Vec<_>>()).prop_shuffle()) {
        let (head, tests) = common::GAINS_MODEL.split_at(common::GAINS_MODEL.find("test ").unwrap());
        let blocks: Vec<&str> = tests.split_inclusive("}\n").collect();
        prop_assert_eq!(blocks.len(), 5);
        let dir = tempfile::tempdir().unwrap();
        let straight = dir.path().join("a.bdm");
        let shuffled = dir.path().join("b.bdm");
        fs::write(&straight, common::GAINS_MODEL).unwrap();
        let text: String = std::iter::once(head).chain(order.iter().map(|&i| blocks[i])).collect();
        fs::write(&shuffled, &text).unwrap();
        let strip = |s: SuiteResult| -> BTreeMap<String, (TestStatus, Vec<String>)> {
            s.cases.into_iter().map(|c| (c.name, (c.status, c.messages.into_iter().map(|m| m.text).collect()))).collect()
        };
        prop_assert_eq!(strip(run_suite(&straight)), strip(run_suite(&shuffled)));
    }

    #[test]
    fn every_tuple_change_creates_one_virtual_revision(changes in prop::collection::vec((0usize..3, any::<bool>()), 1..12)) {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let mut current: BTreeMap<String, String> = ["main", "ext1", "ext2"].iter().map(|c| (c.to_string(), "1".to_string())).collect();
        store.next_virtual_revision(&current).unwrap();
        let mut expected = 1u64;
        for (component, bump) in changes {
            if bump {
                let key = ["main", "ext1", "ext2"][component];
                let next = current[key].parse::<u32>().unwrap() + 1;
                current.insert(key.to_string(), next.to_string());
                expected += 1;
            }
            let created = store.next_virtual_revision(&current).unwrap();
            prop_assert_eq!(created.is_some(), bump);
        }
        let vids: Vec<u64> = store.revisions().unwrap().iter().map(|r| r.vid).collect();
        prop_assert_eq!(vids, (1..=expected).collect::<Vec<_>>());
    }
}
