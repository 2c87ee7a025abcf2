use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::{DateTime, SecondsFormat, Utc};
use thiserror::Error;
use walkdir::WalkDir;

use crate::results::{elapsed_ms, now, Message, SuiteResult, TestCaseResult};
use crate::slrunner::{stem, synthetic_error, LOAD_CASE};
use crate::testdsl::{exec_test, parse_suite_source, Runtime, SuiteDecl, EXTENSION};

pub const HEADER: &str = "heterotest-manifest v1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub file: PathBuf,
    pub suite: String,
    pub method: String,
    pub line: usize,
}

/// A file that could not be parsed during the scan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub file: PathBuf,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunnerManifest {
    pub entries: Vec<ManifestEntry>,
    pub diagnostics: Vec<Diagnostic>,
    pub generated_at: DateTime<Utc>,
    pub format_version: u32,
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

fn suite_files(paths: &[PathBuf]) -> Vec<PathBuf> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            for e in WalkDir::new(p).sort_by_file_name().into_iter().filter_map(Result::ok) {
                if e.file_type().is_file() && e.path().extension().is_some_and(|x| x == EXTENSION) {
                    files.push(e.into_path());
                }
            }
        } else {
            files.push(p.clone());
        }
    }
    files
}

/// Lists every runnable test method in the given files and directories.
/// Unreadable or malformed files become diagnostics.
pub fn scan(paths: &[PathBuf]) -> RunnerManifest {
    let mut m = RunnerManifest {
        entries: Vec::new(),
        diagnostics: Vec::new(),
        generated_at: now(),
        format_version: FORMAT_VERSION,
    };
    for file in suite_files(paths) {
        let parsed = fs::read_to_string(&file)
            .map_err(|e| e.to_string())
            .and_then(|text| parse_suite_source(&text, &file).map_err(|e| e.to_string()));
        match parsed {
            Ok(suites) => {
                for s in &suites {
                    for t in s.runnable() {
                        let e = ManifestEntry {
                            file: file.clone(),
                            suite: s.name.clone(),
                            method: t.name.clone(),
                            line: t.line,
                        };
                        if !m.entries.iter().any(|x| x.file == e.file && x.suite == e.suite && x.method == e.method) {
                            m.entries.push(e);
                        }
                    }
                }
            }
            Err(message) => {
                log::warn!("{}: {message}", file.display());
                m.diagnostics.push(Diagnostic { file, message });
            }
        }
    }
    m
}

fn flat(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

fn relative(path: &Path, base: &Path) -> String {
    let abs = |p: &Path| {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            std::env::current_dir().map(|d| d.join(p)).unwrap_or_else(|_| p.to_path_buf())
        }
    };
    let rel = pathdiff::diff_paths(abs(path), abs(base)).unwrap_or_else(|| path.to_path_buf());
    rel.to_string_lossy().replace('\\', "/")
}

/// Serialized manifest with file paths relative to `base`.
pub fn manifest_string(m: &RunnerManifest, base: &Path) -> String {
    let mut out = format!("{HEADER}\n");
    let _ = writeln!(
        out,
        "# generated_at {}",
        m.generated_at.to_rfc3339_opts(SecondsFormat::Secs, true)
    );
    for d in &m.diagnostics {
        let _ = writeln!(out, "# diagnostic\t{}\t{}", flat(&relative(&d.file, base)), flat(&d.message));
    }
    for e in &m.entries {
        let _ = writeln!(out, "{}\t{}\t{}\t{}", flat(&relative(&e.file, base)), e.suite, e.method, e.line);
    }
    out
}

/// Writes the manifest; entry paths are stored relative to its directory.
pub fn generate_runner(m: &RunnerManifest, out: &Path) -> io::Result<()> {
    let base = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    if !base.as_os_str().is_empty() {
        fs::create_dir_all(base)?;
    }
    fs::write(out, manifest_string(m, base))
}

/// Reads a manifest; entry paths are resolved against its directory.
pub fn read_manifest(path: &Path) -> Result<RunnerManifest, ManifestError> {
    let text = fs::read_to_string(path).map_err(|source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new(""));
    parse_manifest(&text, base).map_err(|(line, message)| ManifestError::Format {
        path: path.to_path_buf(),
        line,
        message,
    })
}

pub fn parse_manifest(text: &str, base: &Path) -> Result<RunnerManifest, (usize, String)> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == HEADER => {}
        Some((_, h)) if h.starts_with("heterotest-manifest ") => {
            return Err((1, format!("unsupported manifest version `{h}`")))
        }
        _ => return Err((1, format!("missing `{HEADER}` header"))),
    }
    let mut m = RunnerManifest {
        entries: Vec::new(),
        diagnostics: Vec::new(),
        generated_at: now(),
        format_version: FORMAT_VERSION,
    };
    for (i, line) in lines {
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("# generated_at ") {
            m.generated_at = DateTime::parse_from_rfc3339(rest.trim())
                .map_err(|e| (n, format!("bad timestamp: {e}")))?
                .with_timezone(&Utc);
        } else if let Some(rest) = line.strip_prefix("# diagnostic\t") {
            let (file, message) = rest.split_once('\t').unwrap_or((rest, ""));
            m.diagnostics.push(Diagnostic {
                file: base.join(file),
                message: message.to_string(),
            });
        } else if line.starts_with('#') {
            continue;
        } else {
            let cols: Vec<&str> = line.split('\t').collect();
            let [file, suite, method, l] = cols[..] else {
                return Err((n, format!("expected 4 tab-separated fields, found {}", cols.len())));
            };
            m.entries.push(ManifestEntry {
                file: base.join(file),
                suite: suite.to_string(),
                method: method.to_string(),
                line: l.parse().map_err(|_| (n, format!("bad line number `{l}`")))?,
            });
        }
    }
    Ok(m)
}

/// Executes the listed tests in manifest order, grouped by (file, suite).
/// Each file is parsed once and registered with the runtime's coverage
/// session; scan diagnostics become error suites.
pub fn execute_manifest(m: &RunnerManifest, rt: &mut Runtime) -> Vec<SuiteResult> {
    let mut results = Vec::new();
    for d in &m.diagnostics {
        results.push(synthetic_error(stem(&d.file), &d.file, LOAD_CASE, d.message.clone()));
    }
    let mut parsed: HashMap<PathBuf, Result<Vec<SuiteDecl>, String>> = HashMap::new();
    let mut groups: Vec<((PathBuf, String), Vec<&ManifestEntry>)> = Vec::new();
    for e in &m.entries {
        let key = (e.file.clone(), e.suite.clone());
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(e),
            None => groups.push((key, vec![e])),
        }
    }
    for ((file, suite_name), entries) in groups {
        let suites = parsed.entry(file.clone()).or_insert_with(|| {
            let text = fs::read_to_string(&file).map_err(|e| format!("cannot read {}: {e}", file.display()))?;
            let suites = parse_suite_source(&text, &file).map_err(|e| format!("{}: {e}", file.display()))?;
            if let Some(cov) = rt.coverage() {
                cov.register(&file.display().to_string(), &text, &suites);
            }
            Ok(suites)
        });
        let suites = match suites {
            Ok(s) => s,
            Err(msg) => {
                results.push(synthetic_error(suite_name, &file, LOAD_CASE, msg.clone()));
                continue;
            }
        };
        let started = now();
        let start = Instant::now();
        let mut cases = Vec::new();
        let decl = suites.iter().find(|s| s.name == suite_name);
        for e in entries {
            let r = match decl.and_then(|d| d.method(&e.method).map(|t| (d, t))) {
                Some((d, t)) => exec_test(d, t, rt),
                None => TestCaseResult::error(
                    &e.method,
                    Message::new(format!("test `{}::{}` not found", e.suite, e.method))
                        .at_line(file.display().to_string(), e.line),
                ),
            };
            cases.push(r);
        }
        results.push(SuiteResult {
            suite: suite_name,
            source_file: file.display().to_string(),
            started_at: started,
            duration_ms: elapsed_ms(start),
            cases,
        });
    }
    results
}
