use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;
use walkdir::WalkDir;

use crate::blockmodel::parse_model_file;
use crate::testdsl::EXTENSION;

/// First line of every generated adapter file.
pub const MARKER: &str = "// @generated by heterotest adapt";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdapterSpec {
    pub model_suite: PathBuf,
    pub test_case: String,
    pub adapter_method: String,
}

#[derive(Debug, Default)]
pub struct AdapterOutcome {
    pub written: Vec<PathBuf>,
    /// Model files that were skipped, with the reason.
    pub diagnostics: Vec<(PathBuf, String)>,
}

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error("{0} exists and was not generated by heterotest; refusing to overwrite")]
    Collision(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect()
}

/// Adapter method names for the given cases of one suite, unique within the
/// suite; collisions get a numeric suffix.
pub fn adapter_names(suite: &str, cases: &[String]) -> Vec<String> {
    let mut used = HashSet::new();
    cases
        .iter()
        .map(|c| {
            let base = format!("test_{}_{}", sanitize(suite), sanitize(c));
            let mut name = base.clone();
            let mut n = 2;
            while !used.insert(name.clone()) {
                name = format!("{base}_{n}");
                n += 1;
            }
            name
        })
        .collect()
}

/// Source text of the adapter suite for one model suite. `model_ref` is the
/// model path as written into `slunit_run` calls.
pub fn adapter_source(suite: &str, model_ref: &str, specs: &[AdapterSpec]) -> String {
    let mut out = format!("{MARKER}\n#include <cxxtest/TestSuite.h>\n\n");
    let _ = writeln!(out, "class Slunit_{} : public CxxTest::TestSuite\n{{\npublic:", sanitize(suite));
    let quoted = model_ref.replace('\\', "\\\\").replace('"', "\\\"");
    for (i, s) in specs.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(
            out,
            "    void {}( void )\n    {{\n        auto r = slunit_run(\"{quoted}\", \"{}\");\n        TS_ASSERT_EQUALS(r.status, 0);\n    }}",
            s.adapter_method, s.test_case
        );
    }
    out.push_str("};\n");
    out
}

fn is_generated(path: &Path) -> bool {
    fs::read_to_string(path)
        .map(|t| t.lines().next() == Some(MARKER))
        .unwrap_or(false)
}

/// Writes one adapter `.tsuite` per model suite under `model_dir`, mirroring
/// its directory layout in `out_dir`. Previously generated adapters are
/// overwritten; hand-written files are not.
pub fn generate_adapters(model_dir: &Path, out_dir: &Path) -> Result<AdapterOutcome, AdapterError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| AdapterError::Io { path, source }
    };
    let mut outcome = AdapterOutcome::default();
    let models: Vec<PathBuf> = WalkDir::new(model_dir)
        .sort_by_file_name()
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file() && e.path().extension().is_some_and(|x| x == "bdm"))
        .map(|e| e.into_path())
        .collect();
    for model in models {
        let graph = match parse_model_file(&model) {
            Ok(g) => g,
            Err(e) => {
                log::warn!("skipping {}: {e}", model.display());
                outcome.diagnostics.push((model, e.to_string()));
                continue;
            }
        };
        let rel = model.strip_prefix(model_dir).unwrap_or(&model);
        let target = out_dir.join(rel).with_extension(EXTENSION);
        let parent = target.parent().unwrap_or(out_dir);
        fs::create_dir_all(parent).map_err(io_err(parent))?;
        if target.exists() && !is_generated(&target) {
            return Err(AdapterError::Collision(target));
        }
        let abs = |p: &Path| fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf());
        let model_ref = pathdiff::diff_paths(abs(&model), abs(parent))
            .unwrap_or_else(|| abs(&model))
            .to_string_lossy()
            .replace('\\', "/");
        let cases: Vec<String> = graph.tests().map(|t| t.name.clone()).collect();
        let specs: Vec<AdapterSpec> = adapter_names(&graph.suite_name, &cases)
            .into_iter()
            .zip(&cases)
            .map(|(m, c)| AdapterSpec {
                model_suite: model.clone(),
                test_case: c.clone(),
                adapter_method: m,
            })
            .collect();
        fs::write(&target, adapter_source(&graph.suite_name, &model_ref, &specs)).map_err(io_err(&target))?;
        outcome.written.push(target);
    }
    Ok(outcome)
}
