//! Fixtures and helpers shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use regex::Regex;

pub const MY_TEST_SUITE: &str = "\
// MyTestSuite.h
#include <cxxtest/TestSuite.h>

class MyTestSuite : public CxxTest::TestSuite
{
public:
    void testAddition( void )
    {
        TS_ASSERT( 1 + 1 > 1 );
        TS_ASSERT_EQUALS( 1 + 1, 2 );
    }
};
";

/// 10 instrumentable statements, 7 executed: testA runs 4, testB stops at
/// its third statement, the helper never runs.
pub const COVERAGE_SUITE: &str = "\
class CovSuite : public CxxTest::TestSuite
{
public:
    void check()
    {
        int unused = 1;
        TS_ASSERT(unused == 1);
    }

    void testA()
    {
        int a = 2;
        int b = 3;
        TS_ASSERT_EQUALS(a + b, 5);
        TS_ASSERT(a < b);
    }

    void testB()
    {
        int c = 4;
        int d = 5;
        TS_ASSERT_EQUALS(c, d);
        TS_ASSERT(c > 0);
    }
};
";
pub const COVERAGE_INSTRUMENTABLE: [usize; 10] = [6, 7, 12, 13, 14, 15, 20, 21, 22, 23];
pub const COVERAGE_EXECUTED: [usize; 7] = [12, 13, 14, 15, 20, 21, 22];

pub const GAINS_MODEL: &str = "\
# gain plant with a mix of verdicts
suite gains
steps 5
sut {
 in u
 out y
 block g gain 2
 wire u -> g
 wire g -> y
}
test test_double {
 block c const 3
 block e const 6
 block a assert_eq
 wire c -> sut.u
 wire sut.y -> a.actual
 wire e -> a.expected
}
test test_wrong {
 block c const 3
 block e const 7
 block a assert_eq
 wire c -> sut.u
 wire sut.y -> a.actual
 wire e -> a.expected
}
test test_loop {
 block c const 1
 block s sum ++
 block a assert_eq
 wire c -> s.in1
 wire s -> s.in2
 wire s -> a.actual
 wire c -> a.expected
}
test test_ramp {
 block t clock 1
 block e clock 2
 block a assert_eq
 wire t -> sut.u
 wire sut.y -> a.actual
 wire e -> a.expected
}
test test_inf {
 block c const 1e200
 block p product
 block z const 0
 block a assert_eq
 wire c -> p.in1
 wire c -> p.in2
 wire p -> a.actual
 wire z -> a.expected
}
";

pub const DELAY_MODEL: &str = "\
suite delays
steps 4
test test_delay_pass {
 block s sequence 1 2 3 4
 block d delay 0
 block e sequence 0 1 2 3
 block a assert_eq
 block k sink
 wire s -> d
 wire d -> a.actual
 wire e -> a.expected
 wire d -> k
}
test test_delay_fail {
 block s step 2 0 1
 block z const 0
 block a assert_eq
 wire s -> a.actual
 wire z -> a.expected
}
test test_sat {
 block c const 5
 block s saturate -1 1
 block e const 1
 block a assert_eq
 wire c -> s
 wire s -> a.actual
 wire e -> a.expected
}
";

pub const REF_MODEL: &str = "\
suite refs
sut ref missing.bdm#plant
test test_uses_sut {
 block c const 1
 block e const 1
 block a assert_eq
 wire c -> sut.u
 wire sut.y -> a.actual
 wire e -> a.expected
}
test test_standalone {
 block c const 1
 block a assert_eq
 wire c -> a.actual
 wire c -> a.expected
}
";

/// Writes the three-file model corpus (10 test cases spanning all verdicts).
pub fn write_model_corpus(dir: &Path) -> Vec<PathBuf> {
    fs::create_dir_all(dir).unwrap();
    [("gains.bdm", GAINS_MODEL), ("delays.bdm", DELAY_MODEL), ("refs.bdm", REF_MODEL)]
        .iter()
        .map(|(name, text)| {
            let p = dir.join(name);
            fs::write(&p, text).unwrap();
            p
        })
        .collect()
}

/// Adds revision `rev` to a journal repository and points HEAD at it.
pub fn commit(repo: &Path, rev: &str, files: &[(&str, &str)]) {
    let dir = repo.join("revisions").join(rev);
    fs::create_dir_all(&dir).unwrap();
    for (name, text) in files {
        let p = dir.join(name);
        fs::create_dir_all(p.parent().unwrap()).unwrap();
        fs::write(p, text).unwrap();
    }
    fs::write(repo.join("HEAD"), format!("{rev}\n")).unwrap();
}

/// Blanks timestamps and durations in XML and HTML output.
pub fn mask(text: &str) -> String {
    let attrs = Regex::new(r#"(timestamp|started_at|duration_ms)="[^"]*""#).unwrap();
    let spans = Regex::new(r#"class="(timestamp|duration)">[^<]*<"#).unwrap();
    let t = attrs.replace_all(text, "$1=\"-\"");
    spans.replace_all(&t, "class=\"$1\">-<").into_owned()
}

/// Checks every `href` in the HTML files of `dir`: targets must be files in
/// `dir` and fragments must name an existing `id`. Returns the pages
/// reachable from `start`.
pub fn crawl(dir: &Path, start: &str) -> Result<BTreeSet<String>, String> {
    let href = Regex::new(r#"href="([^"]*)""#).unwrap();
    let id = Regex::new(r#"id="([^"]*)""#).unwrap();
    let mut pages: HashMap<String, String> = HashMap::new();
    for e in fs::read_dir(dir).map_err(|e| e.to_string())? {
        let p = e.map_err(|e| e.to_string())?.path();
        if p.extension().is_some_and(|x| x == "html") {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            pages.insert(name, fs::read_to_string(&p).map_err(|e| e.to_string())?);
        }
    }
    let mut seen = BTreeSet::new();
    let mut todo = vec![start.to_string()];
    while let Some(page) = todo.pop() {
        if !seen.insert(page.clone()) {
            continue;
        }
        let text = pages.get(&page).ok_or_else(|| format!("missing page {page}"))?;
        for cap in href.captures_iter(text) {
            let link = &cap[1];
            let (file, frag) = link.split_once('#').unwrap_or((link, ""));
            if file.contains("..") || file.contains(':') || file.starts_with('/') {
                return Err(format!("{page}: link `{link}` leaves the report directory"));
            }
            let target = if file.is_empty() { page.clone() } else { file.to_string() };
            if !dir.join(&target).is_file() {
                return Err(format!("{page}: dangling link `{link}`"));
            }
            if !frag.is_empty() {
                let body = pages.get(&target).ok_or_else(|| format!("{page}: `{link}` is not a page"))?;
                if !id.captures_iter(body).any(|c| &c[1] == frag) {
                    return Err(format!("{page}: no anchor for `{link}`"));
                }
            }
            if target.ends_with(".html") {
                todo.push(target);
            }
        }
    }
    Ok(seen)
}
