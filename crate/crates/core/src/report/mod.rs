//! Results XML (writer and reader) and the HTML report tree built from it.

pub mod html;
mod xml;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};

use crate::coverage::CoverageMap;
use crate::results::{total_counts, Counts, SuiteResult};

pub use html::{render_html, render_html_rooted, ReportTree, STYLESHEET};
pub use xml::{read_results_str, read_results_xml, results_xml_string, write_results_xml, SchemaError};

/// Version written to the root `format` attribute.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ResultsDocument {
    /// Virtual revision the run belongs to, for CI runs.
    pub revision: Option<u64>,
    pub timestamp: DateTime<Utc>,
    pub duration_ms: u64,
    pub suites: Vec<SuiteResult>,
    pub coverage: Option<CoverageMap>,
}

impl ResultsDocument {
    pub fn counts(&self) -> Counts {
        total_counts(&self.suites)
    }
}

pub fn overview_file_name(report_name: &str) -> String {
    format!("{report_name}_report.html")
}

pub fn results_file_name(report_name: &str) -> String {
    format!("{report_name}_results.xml")
}

/// Writes `<name>_results.xml` and renders the HTML tree into `out_dir`.
/// Returns every file written.
pub fn publish(
    doc: &ResultsDocument,
    report_name: &str,
    verbosity: u32,
    out_dir: &Path,
) -> io::Result<Vec<PathBuf>> {
    publish_rooted(doc, report_name, verbosity, out_dir, Path::new(""))
}

/// Like [`publish`], resolving relative source paths against `root`.
pub fn publish_rooted(
    doc: &ResultsDocument,
    report_name: &str,
    verbosity: u32,
    out_dir: &Path,
    root: &Path,
) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let xml_path = out_dir.join(results_file_name(report_name));
    write_results_xml(doc, &xml_path)?;
    let tree = render_html_rooted(doc, report_name, verbosity, out_dir, root)?;
    let mut files = vec![xml_path];
    files.extend(tree.files());
    Ok(files)
}

/// Report name implied by a results file: `nightly_results.xml` -> `nightly`.
pub fn report_name_from_results(path: &Path) -> String {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "report".into());
    stem.strip_suffix("_results")
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .unwrap_or(stem)
}
