use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::PathBuf;

use chrono::SecondsFormat;

use super::pipeline::{ActionStatus, PipelineRun};
use super::store::{Store, StoreError, VirtualRevision};
use crate::report::html::{escape, STYLESHEET, STYLESHEET_FILE};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunState {
    /// Marked in progress, or stored without a finished run record.
    Running,
    Complete,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRow {
    pub revision: VirtualRevision,
    pub state: RunState,
    pub run: Option<PipelineRun>,
}

/// Stored revisions in vid order, each with its run record if complete.
pub fn history(store: &Store) -> Result<Vec<HistoryRow>, StoreError> {
    Ok(store
        .revisions()?
        .into_iter()
        .map(|revision| {
            let run = store.load_run(revision.vid);
            HistoryRow {
                state: if run.is_some() { RunState::Complete } else { RunState::Running },
                revision,
                run,
            }
        })
        .collect())
}

pub fn index_html(rows: &[HistoryRow]) -> String {
    let mut out = format!(
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>Build history</title>\n<link rel=\"stylesheet\" href=\"{STYLESHEET_FILE}\">\n</head>\n<body>\n<h1>Build history</h1>\n"
    );
    if rows.is_empty() {
        out.push_str("<p>No virtual revisions recorded yet.</p>\n");
    }
    out.push_str("<table class=\"history\">\n<tr><th>Vid</th><th>Revisions</th><th>Observed</th><th>Pipeline</th><th>Passed</th><th>Failed</th><th>Errors</th><th>Report</th></tr>\n");
    for r in rows {
        let v = &r.revision;
        let _ = write!(
            out,
            "<tr><td>{}</td><td>{}</td><td>{}</td>",
            v.vid,
            escape(&v.tuple()),
            v.observed_at.to_rfc3339_opts(SecondsFormat::Secs, true)
        );
        match &r.run {
            None => out.push_str("<td>running</td><td></td><td></td><td></td><td></td></tr>\n"),
            Some(run) => {
                let status = match run.actions.iter().find(|a| a.status == ActionStatus::Failed) {
                    Some(a) => format!("{} failed", a.action),
                    None => "ok".into(),
                };
                let c = run.counts.unwrap_or_default();
                let link = match &run.report {
                    Some(p) => format!("<a href=\"{}\">report</a>", escape(p)),
                    None => String::new(),
                };
                let _ = writeln!(
                    out,
                    "<td>{}</td><td>{}</td><td>{}</td><td>{}</td><td>{link}</td></tr>",
                    escape(&status),
                    c.passed,
                    c.failed,
                    c.error
                );
            }
        }
    }
    out.push_str("</table>\n</body>\n</html>\n");
    out
}

/// Writes `index.html` (and the stylesheet) into the store root.
pub fn write_index(store: &Store) -> Result<PathBuf, StoreError> {
    let rows = history(store)?;
    let path = store.root().join("index.html");
    let io_err = |source: io::Error| StoreError::Io {
        path: path.clone(),
        source,
    };
    fs::write(store.root().join(STYLESHEET_FILE), STYLESHEET).map_err(io_err)?;
    fs::write(&path, index_html(&rows)).map_err(io_err)?;
    Ok(path)
}
