use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use thiserror::Error;

use super::{ResultsDocument, FORMAT_VERSION};
use crate::blockmodel::SinkSeries;
use crate::coverage::{percentage, CoverageMap, FileCoverage};
use crate::results::{Counts, Message, SuiteResult, TestCaseResult, TestStatus};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{location}: <{element}>: {message}")]
pub struct SchemaError {
    pub element: String,
    /// `line:column` in the document, or the file path for I/O failures.
    pub location: String,
    pub message: String,
}

fn escape_attr(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            '\t' => out.push_str("&#9;"),
            c => out.push(c),
        }
    }
    out
}

fn escape_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '\r' => out.push_str("&#13;"),
            c => out.push(c),
        }
    }
    out
}

fn ts(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

fn counts_attrs(c: Counts) -> String {
    format!(
        "tests=\"{}\" passed=\"{}\" failed=\"{}\" error=\"{}\"",
        c.total(),
        c.passed,
        c.failed,
        c.error
    )
}

fn join_lines(set: &BTreeSet<usize>) -> String {
    set.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

/// Serializes a document. Attribute order is fixed, line endings are LF and
/// durations and timestamps are the only fields that vary between runs.
pub fn results_xml_string(doc: &ResultsDocument) -> String {
    let mut x = String::new();
    x.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = write!(x, "<testresults format=\"{FORMAT_VERSION}\"");
    if let Some(rev) = doc.revision {
        let _ = write!(x, " revision=\"{rev}\"");
    }
    let _ = writeln!(
        x,
        " timestamp=\"{}\" duration_ms=\"{}\" {}>",
        ts(&doc.timestamp),
        doc.duration_ms,
        counts_attrs(doc.counts())
    );
    for s in &doc.suites {
        let _ = writeln!(
            x,
            "  <suite name=\"{}\" file=\"{}\" started_at=\"{}\" duration_ms=\"{}\" {}>",
            escape_attr(&s.suite),
            escape_attr(&s.source_file),
            ts(&s.started_at),
            s.duration_ms,
            counts_attrs(s.counts())
        );
        for t in &s.cases {
            write_test(&mut x, t);
        }
        x.push_str("  </suite>\n");
    }
    if let Some(cov) = &doc.coverage {
        let _ = writeln!(
            x,
            "  <coverage instrumentable=\"{}\" executed=\"{}\" percent=\"{:.1}\">",
            cov.instrumentable(),
            cov.executed(),
            cov.percent()
        );
        for f in &cov.files {
            let _ = writeln!(
                x,
                "    <file name=\"{}\" instrumentable=\"{}\" executed=\"{}\" percent=\"{:.1}\" lines=\"{}\" executed_lines=\"{}\"/>",
                escape_attr(&f.name),
                f.instrumentable.len(),
                f.executed.len(),
                f.percent(),
                join_lines(&f.instrumentable),
                join_lines(&f.executed)
            );
        }
        x.push_str("  </coverage>\n");
    }
    x.push_str("</testresults>\n");
    x
}

fn write_test(x: &mut String, t: &TestCaseResult) {
    let head = format!(
        "    <test name=\"{}\" status=\"{}\" duration_ms=\"{}\"",
        escape_attr(&t.name),
        t.status,
        t.duration_ms
    );
    if t.messages.is_empty() && t.output.is_empty() && t.trace.is_empty() {
        let _ = writeln!(x, "{head}/>");
        return;
    }
    let _ = writeln!(x, "{head}>");
    for m in &t.messages {
        x.push_str("      <failure");
        if let Some(f) = &m.file {
            let _ = write!(x, " file=\"{}\"", escape_attr(f));
        }
        if let Some(l) = m.line {
            let _ = write!(x, " line=\"{l}\"");
        }
        if let Some(b) = &m.block {
            let _ = write!(x, " block=\"{}\"", escape_attr(b));
        }
        if let Some(s) = m.step {
            let _ = write!(x, " step=\"{s}\"");
        }
        let _ = writeln!(x, " message=\"{}\"/>", escape_attr(&m.text));
    }
    if !t.output.is_empty() {
        let _ = writeln!(x, "      <output>{}</output>", escape_text(&t.output));
    }
    for series in &t.trace {
        let _ = writeln!(x, "      <trace sink=\"{}\">", escape_attr(&series.name));
        for (step, v) in series.values.iter().enumerate() {
            let _ = writeln!(x, "        <row step=\"{step}\" value=\"{v}\"/>");
        }
        x.push_str("      </trace>\n");
    }
    x.push_str("    </test>\n");
}

pub fn write_results_xml(doc: &ResultsDocument, out: &Path) -> io::Result<()> {
    fs::write(out, results_xml_string(doc))
}

struct Reader<'a> {
    doc: &'a roxmltree::Document<'a>,
    warnings: Vec<String>,
}

type Node<'a, 'i> = roxmltree::Node<'a, 'i>;

impl Reader<'_> {
    fn error(&self, node: Node, message: impl Into<String>) -> SchemaError {
        let pos = self.doc.text_pos_at(node.range().start);
        SchemaError {
            element: node.tag_name().name().to_string(),
            location: format!("{}:{}", pos.row, pos.col),
            message: message.into(),
        }
    }

    fn req<'n>(&self, node: Node<'n, '_>, attr: &str) -> Result<&'n str, SchemaError> {
        node.attribute(attr)
            .ok_or_else(|| self.error(node, format!("missing required attribute `{attr}`")))
    }

    fn num<T: std::str::FromStr>(&self, node: Node, attr: &str) -> Result<T, SchemaError> {
        let raw = self.req(node, attr)?;
        raw.parse()
            .map_err(|_| self.error(node, format!("attribute `{attr}` has invalid value `{raw}`")))
    }

    fn opt_num<T: std::str::FromStr>(&self, node: Node, attr: &str) -> Result<Option<T>, SchemaError> {
        match node.attribute(attr) {
            None => Ok(None),
            Some(_) => self.num(node, attr).map(Some),
        }
    }

    fn time(&self, node: Node, attr: &str) -> Result<DateTime<Utc>, SchemaError> {
        let raw = self.req(node, attr)?;
        DateTime::parse_from_rfc3339(raw)
            .map(|t| t.with_timezone(&Utc))
            .map_err(|_| self.error(node, format!("attribute `{attr}` is not an RFC 3339 time")))
    }

    fn check_counts(&self, node: Node, c: Counts) -> Result<(), SchemaError> {
        for (attr, want) in [
            ("tests", c.total()),
            ("passed", c.passed),
            ("failed", c.failed),
            ("error", c.error),
        ] {
            if let Some(got) = self.opt_num::<usize>(node, attr)? {
                if got != want {
                    return Err(self.error(
                        node,
                        format!("attribute `{attr}`={got} disagrees with {want} derived from children"),
                    ));
                }
            }
        }
        Ok(())
    }

    fn unknown(&mut self, node: Node) {
        let pos = self.doc.text_pos_at(node.range().start);
        let msg = format!(
            "{}:{}: ignoring unknown element <{}>",
            pos.row,
            pos.col,
            node.tag_name().name()
        );
        log::warn!("{msg}");
        self.warnings.push(msg);
    }

    fn elements<'n, 'i>(node: Node<'n, 'i>) -> impl Iterator<Item = Node<'n, 'i>> {
        node.children().filter(|c| c.is_element())
    }

    fn document(&mut self) -> Result<ResultsDocument, SchemaError> {
        let root = self.doc.root_element();
        if root.tag_name().name() != "testresults" {
            return Err(self.error(root, "root element must be <testresults>"));
        }
        let format: u32 = self.num(root, "format")?;
        if format != FORMAT_VERSION {
            return Err(self.error(root, format!("unsupported format version {format}")));
        }
        let mut doc = ResultsDocument {
            revision: self.opt_num(root, "revision")?,
            timestamp: self.time(root, "timestamp")?,
            duration_ms: self.num(root, "duration_ms")?,
            suites: Vec::new(),
            coverage: None,
        };
        for child in Self::elements(root) {
            match child.tag_name().name() {
                "suite" => {
                    let s = self.suite(child)?;
                    doc.suites.push(s);
                }
                "coverage" => doc.coverage = Some(self.coverage(child)?),
                _ => self.unknown(child),
            }
        }
        self.check_counts(root, doc.counts())?;
        Ok(doc)
    }

    fn suite(&mut self, node: Node) -> Result<SuiteResult, SchemaError> {
        let mut s = SuiteResult {
            suite: self.req(node, "name")?.to_string(),
            source_file: self.req(node, "file")?.to_string(),
            started_at: self.time(node, "started_at")?,
            duration_ms: self.num(node, "duration_ms")?,
            cases: Vec::new(),
        };
        for child in Self::elements(node) {
            if child.tag_name().name() == "test" {
                let t = self.test(child)?;
                s.cases.push(t);
            } else {
                self.unknown(child);
            }
        }
        self.check_counts(node, s.counts())?;
        Ok(s)
    }

    fn test(&mut self, node: Node) -> Result<TestCaseResult, SchemaError> {
        let status: TestStatus = self
            .req(node, "status")?
            .parse()
            .map_err(|e: String| self.error(node, e))?;
        let mut t = TestCaseResult {
            name: self.req(node, "name")?.to_string(),
            status,
            duration_ms: self.num(node, "duration_ms")?,
            messages: Vec::new(),
            output: String::new(),
            trace: Vec::new(),
        };
        for child in Self::elements(node) {
            match child.tag_name().name() {
                "failure" => t.messages.push(Message {
                    text: self.req(child, "message")?.to_string(),
                    file: child.attribute("file").map(str::to_string),
                    line: self.opt_num(child, "line")?,
                    block: child.attribute("block").map(str::to_string),
                    step: self.opt_num(child, "step")?,
                }),
                "output" => t.output = child.text().unwrap_or_default().to_string(),
                "trace" => {
                    let mut series = SinkSeries {
                        name: self.req(child, "sink")?.to_string(),
                        values: Vec::new(),
                    };
                    for row in Self::elements(child) {
                        if row.tag_name().name() != "row" {
                            self.unknown(row);
                            continue;
                        }
                        let step: usize = self.num(row, "step")?;
                        if step != series.values.len() {
                            return Err(self.error(row, format!("expected step {}", series.values.len())));
                        }
                        series.values.push(self.num(row, "value")?);
                    }
                    t.trace.push(series);
                }
                _ => self.unknown(child),
            }
        }
        if t.status != TestStatus::Passed && t.messages.is_empty() {
            return Err(self.error(node, format!("status `{}` requires a <failure> element", t.status)));
        }
        Ok(t)
    }

    fn lines(&self, node: Node, attr: &str) -> Result<BTreeSet<usize>, SchemaError> {
        let raw = self.req(node, attr)?;
        if raw.is_empty() {
            return Ok(BTreeSet::new());
        }
        raw.split(',')
            .map(|p| {
                p.parse()
                    .map_err(|_| self.error(node, format!("attribute `{attr}` has invalid line `{p}`")))
            })
            .collect()
    }

    fn coverage(&mut self, node: Node) -> Result<CoverageMap, SchemaError> {
        let mut map = CoverageMap::default();
        for child in Self::elements(node) {
            if child.tag_name().name() != "file" {
                self.unknown(child);
                continue;
            }
            let f = FileCoverage {
                name: self.req(child, "name")?.to_string(),
                instrumentable: self.lines(child, "lines")?,
                executed: self.lines(child, "executed_lines")?,
            };
            if !f.executed.is_subset(&f.instrumentable) {
                return Err(self.error(child, "executed lines must be instrumentable"));
            }
            self.check_coverage_attrs(child, f.instrumentable.len(), f.executed.len())?;
            map.files.push(f);
        }
        self.check_coverage_attrs(node, map.instrumentable(), map.executed())?;
        Ok(map)
    }

    fn check_coverage_attrs(&self, node: Node, instr: usize, exec: usize) -> Result<(), SchemaError> {
        let i: usize = self.num(node, "instrumentable")?;
        let e: usize = self.num(node, "executed")?;
        let p = self.req(node, "percent")?;
        let want = format!("{:.1}", percentage(exec, instr));
        if i != instr || e != exec || p != want {
            return Err(self.error(node, "coverage counts disagree with line lists"));
        }
        Ok(())
    }
}

/// Parses a results document, returning warnings for ignored elements.
pub fn read_results_str(text: &str) -> Result<(ResultsDocument, Vec<String>), SchemaError> {
    let doc = roxmltree::Document::parse(text).map_err(|e| SchemaError {
        element: String::new(),
        location: format!("{}", e.pos()),
        message: e.to_string(),
    })?;
    let mut r = Reader {
        doc: &doc,
        warnings: Vec::new(),
    };
    let d = r.document()?;
    Ok((d, r.warnings))
}

pub fn read_results_xml(path: &Path) -> Result<ResultsDocument, SchemaError> {
    let text = fs::read_to_string(path).map_err(|e| SchemaError {
        element: String::new(),
        location: path.display().to_string(),
        message: e.to_string(),
    })?;
    read_results_str(&text).map(|(d, _)| d)
}
