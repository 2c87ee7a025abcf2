//! Statement coverage for DSL sources.
//!
//! The interpreter calls [`CoverageSession::record`] with the file and line of
//! every statement before executing it. Lines are matched against the set of
//! instrumentable statement lines registered for each file.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::sync::Mutex;

use crate::report::html::escape;
use crate::testdsl::SuiteDecl;

/// Lines holding an executable statement. Method headers, braces and blank
/// lines are excluded.
pub fn enumerate_instrumentable(suite: &SuiteDecl) -> BTreeSet<usize> {
    suite
        .methods
        .iter()
        .flat_map(|m| m.body.iter().map(|s| s.line))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FileCoverage {
    pub name: String,
    pub instrumentable: BTreeSet<usize>,
    pub executed: BTreeSet<usize>,
}

/// `executed / instrumentable` as a percentage rounded to one decimal; 0.0
/// when nothing is instrumentable.
pub fn percentage(executed: usize, instrumentable: usize) -> f64 {
    if instrumentable == 0 {
        return 0.0;
    }
    (executed as f64 * 1000.0 / instrumentable as f64).round() / 10.0
}

impl FileCoverage {
    pub fn percent(&self) -> f64 {
        percentage(self.executed.len(), self.instrumentable.len())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CoverageMap {
    /// Sorted by file name.
    pub files: Vec<FileCoverage>,
}

impl CoverageMap {
    pub fn instrumentable(&self) -> usize {
        self.files.iter().map(|f| f.instrumentable.len()).sum()
    }

    pub fn executed(&self) -> usize {
        self.files.iter().map(|f| f.executed.len()).sum()
    }

    /// Aggregate over all files: Σexecuted / Σinstrumentable.
    pub fn percent(&self) -> f64 {
        percentage(self.executed(), self.instrumentable())
    }

    pub fn file(&self, name: &str) -> Option<&FileCoverage> {
        self.files.iter().find(|f| f.name == name)
    }
}

#[derive(Debug, Default)]
struct State {
    files: BTreeMap<String, FileCoverage>,
    sources: BTreeMap<String, String>,
    diagnostics: Vec<String>,
}

/// Collects probe hits for one runner execution. Safe to share across threads.
#[derive(Debug, Default)]
pub struct CoverageSession {
    state: Mutex<State>,
}

impl CoverageSession {
    pub fn new() -> Self {
        Self::default()
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Adds every statement line of `suites` to the file's instrumentable set.
    pub fn register(&self, file: &str, source: &str, suites: &[SuiteDecl]) {
        let mut st = self.lock();
        st.sources.insert(file.to_string(), source.to_string());
        let entry = st.files.entry(file.to_string()).or_insert_with(|| FileCoverage {
            name: file.to_string(),
            ..Default::default()
        });
        for s in suites {
            entry.instrumentable.extend(enumerate_instrumentable(s));
        }
    }

    /// Marks a line executed. Lines outside the instrumentable set are kept
    /// as diagnostics and not counted.
    pub fn record(&self, file: &str, line: usize) {
        let mut st = self.lock();
        match st.files.get_mut(file) {
            Some(f) if f.instrumentable.contains(&line) => {
                f.executed.insert(line);
            }
            _ => st
                .diagnostics
                .push(format!("probe {file}:{line} is not an instrumentable statement")),
        }
    }

    pub fn diagnostics(&self) -> Vec<String> {
        self.lock().diagnostics.clone()
    }

    pub fn summarize(&self) -> CoverageSummary {
        let st = self.lock();
        let map = CoverageMap {
            files: st.files.values().cloned().collect(),
        };
        let listings = map
            .files
            .iter()
            .map(|f| Listing::build(st.sources.get(&f.name).map_or("", String::as_str), f))
            .collect();
        CoverageSummary { map, listings }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageSummary {
    pub map: CoverageMap,
    pub listings: Vec<Listing>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineMark {
    Plain,
    Executed,
    Missed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Listing {
    pub file: String,
    pub lines: Vec<(usize, String, LineMark)>,
}

impl Listing {
    pub fn build(source: &str, cov: &FileCoverage) -> Self {
        let lines = source
            .lines()
            .enumerate()
            .map(|(i, text)| {
                let n = i + 1;
                let mark = if cov.executed.contains(&n) {
                    LineMark::Executed
                } else if cov.instrumentable.contains(&n) {
                    LineMark::Missed
                } else {
                    LineMark::Plain
                };
                (n, text.to_string(), mark)
            })
            .collect();
        Listing {
            file: cov.name.clone(),
            lines,
        }
    }

    /// HTML fragment: a table with one row per source line.
    pub fn to_html(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "<table class=\"listing\">");
        for (n, text, mark) in &self.lines {
            let (class, tag) = match mark {
                LineMark::Plain => ("plain", ""),
                LineMark::Executed => ("executed", "✔"),
                LineMark::Missed => ("missed", "✘"),
            };
            let _ = writeln!(
                out,
                "<tr class=\"{class}\"><td class=\"ln\">{n}</td><td class=\"mark\">{tag}</td><td><code>{}</code></td></tr>",
                escape(text)
            );
        }
        out.push_str("</table>\n");
        out
    }
}
