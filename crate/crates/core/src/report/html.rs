//! Static HTML report tree: an overview page, one page per suite and one
//! listing page per covered file, all linking back to the overview.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use chrono::SecondsFormat;

use super::{overview_file_name, ResultsDocument};
use crate::coverage::{FileCoverage, Listing};
use crate::results::{Counts, SuiteResult, TestCaseResult, TestStatus};

pub const STYLESHEET_FILE: &str = "heterotest.css";

pub const STYLESHEET: &str = "\
body { font-family: sans-serif; margin: 2em; color: #222; }
table { border-collapse: collapse; margin: 1em 0; }
th, td { border: 1px solid #ccc; padding: 0.25em 0.6em; text-align: left; }
.badge { padding: 0.1em 0.5em; border-radius: 0.3em; color: #fff; }
.passed { background: #2e7d32; }
.failed { background: #c62828; }
.error { background: #ef6c00; }
pre { background: #f6f6f6; padding: 0.5em; }
.source .hl { background: #ffe0e0; font-weight: bold; }
.listing .executed { background: #e3f5e1; }
.listing .missed { background: #fbe3e3; }
.ln { color: #888; text-align: right; }
";

const CONTEXT_LINES: usize = 3;

pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

fn slug(s: &str) -> String {
    let out: String = s
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect();
    if out.is_empty() {
        "_".into()
    } else {
        out
    }
}

pub fn test_anchor(test: &str) -> String {
    format!("test-{}", slug(test))
}

/// Files produced by [`render_html`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReportTree {
    pub overview: PathBuf,
    pub stylesheet: PathBuf,
    pub suite_pages: Vec<PathBuf>,
    pub coverage_pages: Vec<PathBuf>,
}

impl ReportTree {
    pub fn files(&self) -> Vec<PathBuf> {
        let mut v = vec![self.overview.clone(), self.stylesheet.clone()];
        v.extend(self.suite_pages.iter().cloned());
        v.extend(self.coverage_pages.iter().cloned());
        v
    }
}

/// Assigns unique page names; suites sharing a name get a numeric suffix.
fn page_names(prefix: &str, keys: &[String], reserved: &mut HashSet<String>) -> Vec<String> {
    keys.iter()
        .map(|k| {
            let base = format!("{prefix}_{}", slug(k));
            let mut name = format!("{base}.html");
            let mut n = 2;
            while reserved.contains(&name) {
                name = format!("{base}_{n}.html");
                n += 1;
            }
            reserved.insert(name.clone());
            name
        })
        .collect()
}

fn head(out: &mut String, title: &str) {
    let _ = write!(
        out,
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>{}</title>\n<link rel=\"stylesheet\" href=\"{STYLESHEET_FILE}\">\n</head>\n<body>\n",
        escape(title)
    );
}

fn tail(out: &mut String) {
    out.push_str("</body>\n</html>\n");
}

fn badge(status: TestStatus) -> String {
    format!("<span class=\"badge {status}\">{status}</span>")
}

fn suite_status(c: Counts) -> TestStatus {
    if c.error > 0 {
        TestStatus::Error
    } else if c.failed > 0 {
        TestStatus::Failed
    } else {
        TestStatus::Passed
    }
}

fn count_cells(c: Counts) -> String {
    format!(
        "<td>{}</td><td>{}</td><td>{}</td><td>{}</td>",
        c.total(),
        c.passed,
        c.failed,
        c.error
    )
}

/// Renders the report tree for `doc`. Verbosity 0 writes the overview only,
/// 1 adds suite pages, 2 adds sink tables to suite pages.
pub fn render_html(
    doc: &ResultsDocument,
    report_name: &str,
    verbosity: u32,
    out_dir: &Path,
) -> io::Result<ReportTree> {
    render_html_rooted(doc, report_name, verbosity, out_dir, Path::new(""))
}

/// Like [`render_html`], resolving relative source paths against `root`.
pub fn render_html_rooted(
    doc: &ResultsDocument,
    report_name: &str,
    verbosity: u32,
    out_dir: &Path,
    root: &Path,
) -> io::Result<ReportTree> {
    fs::create_dir_all(out_dir)?;
    let overview = overview_file_name(report_name);
    let mut reserved: HashSet<String> = [overview.clone(), format!("{report_name}_results.html")]
        .into_iter()
        .collect();

    let suite_keys: Vec<String> = doc.suites.iter().map(|s| s.suite.clone()).collect();
    let suite_pages = if verbosity >= 1 {
        page_names(report_name, &suite_keys, &mut reserved)
    } else {
        Vec::new()
    };
    let cov_files: &[FileCoverage] = doc.coverage.as_ref().map_or(&[], |c| &c.files);
    let cov_keys: Vec<String> = cov_files.iter().map(|f| f.name.clone()).collect();
    let cov_pages = page_names(&format!("{report_name}_cov"), &cov_keys, &mut reserved);

    let mut tree = ReportTree {
        overview: out_dir.join(&overview),
        stylesheet: out_dir.join(STYLESHEET_FILE),
        ..Default::default()
    };
    fs::write(&tree.stylesheet, STYLESHEET)?;
    fs::write(&tree.overview, overview_page(doc, report_name, &suite_pages, &cov_pages))?;

    for (suite, page) in doc.suites.iter().zip(&suite_pages) {
        let path = out_dir.join(page);
        fs::write(&path, suite_page(suite, report_name, &overview, verbosity, root))?;
        tree.suite_pages.push(path);
    }
    for (f, page) in cov_files.iter().zip(&cov_pages) {
        let path = out_dir.join(page);
        let source = fs::read_to_string(root.join(&f.name)).unwrap_or_default();
        let mut out = String::new();
        head(&mut out, &format!("Coverage: {}", f.name));
        let _ = writeln!(
            out,
            "<p><a href=\"{}\">Back to overview</a></p>\n<h1>Coverage of {}</h1>\n<p>{} of {} statements executed ({:.1}%)</p>",
            escape(&overview),
            escape(&f.name),
            f.executed.len(),
            f.instrumentable.len(),
            f.percent()
        );
        if source.is_empty() {
            out.push_str("<p class=\"nosource\">source unavailable</p>\n");
        } else {
            out.push_str(&Listing::build(&source, f).to_html());
        }
        tail(&mut out);
        fs::write(&path, out)?;
        tree.coverage_pages.push(path);
    }
    Ok(tree)
}

fn overview_page(
    doc: &ResultsDocument,
    report_name: &str,
    suite_pages: &[String],
    cov_pages: &[String],
) -> String {
    let c = doc.counts();
    let mut out = String::new();
    head(&mut out, &format!("Test report {report_name}"));
    let _ = writeln!(out, "<h1>Test report {}</h1>", escape(report_name));
    let _ = write!(
        out,
        "<p class=\"meta\">Run at <span class=\"timestamp\">{}</span>, duration <span class=\"duration\">{}</span> ms",
        doc.timestamp.to_rfc3339_opts(SecondsFormat::Secs, true),
        doc.duration_ms
    );
    if let Some(rev) = doc.revision {
        let _ = write!(out, ", virtual revision {rev}");
    }
    out.push_str("</p>\n");
    out.push_str("<table class=\"totals\">\n<tr><th>Status</th><th>Tests</th><th>Passed</th><th>Failed</th><th>Errors</th>");
    if doc.coverage.is_some() {
        out.push_str("<th>Coverage</th>");
    }
    let _ = write!(out, "</tr>\n<tr><td>{}</td>{}", badge(suite_status(c)), count_cells(c));
    if let Some(cov) = &doc.coverage {
        let _ = write!(out, "<td>{:.1}%</td>", cov.percent());
    }
    out.push_str("</tr>\n</table>\n");

    out.push_str("<h2>Suites</h2>\n<table class=\"suites\">\n<tr><th>Suite</th><th>File</th><th>Status</th><th>Tests</th><th>Passed</th><th>Failed</th><th>Errors</th><th>Duration (ms)</th></tr>\n");
    for (i, s) in doc.suites.iter().enumerate() {
        let sc = s.counts();
        let name = match suite_pages.get(i) {
            Some(p) => format!("<a class=\"suite-link\" href=\"{}\">{}</a>", escape(p), escape(&s.suite)),
            None => escape(&s.suite),
        };
        let _ = writeln!(
            out,
            "<tr><td>{name}</td><td>{}</td><td>{}</td>{}<td class=\"duration\">{}</td></tr>",
            escape(&s.source_file),
            badge(suite_status(sc)),
            count_cells(sc),
            s.duration_ms
        );
    }
    out.push_str("</table>\n");

    if let Some(cov) = &doc.coverage {
        out.push_str("<h2>Coverage</h2>\n<table class=\"coverage\">\n<tr><th>File</th><th>Statements</th><th>Executed</th><th>Percent</th></tr>\n");
        for (f, p) in cov.files.iter().zip(cov_pages) {
            let _ = writeln!(
                out,
                "<tr><td><a class=\"cov-link\" href=\"{}\">{}</a></td><td>{}</td><td>{}</td><td>{:.1}%</td></tr>",
                escape(p),
                escape(&f.name),
                f.instrumentable.len(),
                f.executed.len(),
                f.percent()
            );
        }
        let _ = writeln!(
            out,
            "<tr><th>Total</th><td>{}</td><td>{}</td><td>{:.1}%</td></tr>\n</table>",
            cov.instrumentable(),
            cov.executed(),
            cov.percent()
        );
    }
    tail(&mut out);
    out
}

fn suite_page(s: &SuiteResult, report_name: &str, overview: &str, verbosity: u32, root: &Path) -> String {
    let mut out = String::new();
    head(&mut out, &format!("{report_name}: {}", s.suite));
    let _ = writeln!(
        out,
        "<p><a href=\"{}\">Back to overview</a></p>\n<h1>Suite {}</h1>\n<p class=\"meta\">File <code>{}</code>, started <span class=\"timestamp\">{}</span>, duration <span class=\"duration\">{}</span> ms</p>",
        escape(overview),
        escape(&s.suite),
        escape(&s.source_file),
        s.started_at.to_rfc3339_opts(SecondsFormat::Secs, true),
        s.duration_ms
    );
    out.push_str("<table class=\"tests\">\n<tr><th>Test</th><th>Status</th><th>Duration (ms)</th></tr>\n");
    for t in &s.cases {
        let _ = writeln!(
            out,
            "<tr><td><a href=\"#{}\">{}</a></td><td>{}</td><td class=\"duration\">{}</td></tr>",
            test_anchor(&t.name),
            escape(&t.name),
            badge(t.status),
            t.duration_ms
        );
    }
    out.push_str("</table>\n");
    for t in &s.cases {
        test_section(&mut out, t, verbosity, root);
    }
    tail(&mut out);
    out
}

fn test_section(out: &mut String, t: &TestCaseResult, verbosity: u32, root: &Path) {
    let _ = writeln!(
        out,
        "<div class=\"test\" id=\"{}\">\n<h2>{} {}</h2>",
        test_anchor(&t.name),
        escape(&t.name),
        badge(t.status)
    );
    for m in &t.messages {
        let mut loc = String::new();
        if let Some(f) = &m.file {
            loc.push_str(f);
            if let Some(l) = m.line {
                let _ = write!(loc, ":{l}");
            }
        }
        if let Some(b) = &m.block {
            let _ = write!(loc, " block {b}");
        }
        if let Some(st) = m.step {
            let _ = write!(loc, " step {st}");
        }
        let _ = writeln!(
            out,
            "<div class=\"message\"><p><code>{}</code> {}</p>",
            escape(loc.trim()),
            escape(&m.text)
        );
        if let (Some(f), Some(l)) = (&m.file, m.line) {
            out.push_str(&source_fragment(&root.join(f), l));
        }
        out.push_str("</div>\n");
    }
    if !t.output.is_empty() {
        let _ = writeln!(out, "<h3>Output</h3>\n<pre class=\"output\">{}</pre>", escape(&t.output));
    }
    if verbosity >= 2 && !t.trace.is_empty() {
        out.push_str("<table class=\"trace\">\n<tr><th>Step</th>");
        for series in &t.trace {
            let _ = write!(out, "<th>{}</th>", escape(&series.name));
        }
        out.push_str("</tr>\n");
        let steps = t.trace.iter().map(|s| s.values.len()).max().unwrap_or(0);
        for step in 0..steps {
            let _ = write!(out, "<tr><td>{step}</td>");
            for series in &t.trace {
                match series.values.get(step) {
                    Some(v) => {
                        let _ = write!(out, "<td>{v}</td>");
                    }
                    None => out.push_str("<td></td>"),
                }
            }
            out.push_str("</tr>\n");
        }
        out.push_str("</table>\n");
    }
    out.push_str("</div>\n");
}

/// A few lines of source around `line` with that line highlighted.
fn source_fragment(file: &Path, line: usize) -> String {
    let Ok(text) = fs::read_to_string(file) else {
        return "<p class=\"nosource\">source unavailable</p>\n".into();
    };
    let lines: Vec<&str> = text.lines().collect();
    if line == 0 || line > lines.len() {
        return "<p class=\"nosource\">source unavailable</p>\n".into();
    }
    let lo = line.saturating_sub(CONTEXT_LINES).max(1);
    let hi = (line + CONTEXT_LINES).min(lines.len());
    let mut out = String::from("<table class=\"source\">\n");
    for n in lo..=hi {
        let class = if n == line { " class=\"hl\"" } else { "" };
        let _ = writeln!(
            out,
            "<tr{class}><td class=\"ln\">{n}</td><td><code>{}</code></td></tr>",
            escape(lines[n - 1])
        );
    }
    out.push_str("</table>\n");
    out
}
