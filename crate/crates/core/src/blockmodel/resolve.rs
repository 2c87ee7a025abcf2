use std::path::{Path, PathBuf};

use thiserror::Error;

use super::parse::{check_fixture_ports, parse_model_file, ParseError};
use super::{ModelGraph, ModelRef, Subsystem, SubsystemDef};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ResolveError {
    #[error("referenced model `{path}` not found on search path")]
    NotFound { path: String },
    #[error("referenced model `{path}`: {error}")]
    Parse { path: String, error: ParseError },
    #[error("subsystem `{name}` not found in `{path}`")]
    MissingSubsystem { path: String, name: String },
    #[error("cyclic model reference: {}", chain.join(" -> "))]
    Cycle { chain: Vec<String> },
    #[error("{0}")]
    Invalid(String),
}

/// Replaces an external SUT reference with the subsystem it names.
///
/// Referenced files are re-read on every call so a suite always sees the
/// current state of the library it tests.
pub fn resolve_sut(graph: &ModelGraph, search_path: &[PathBuf]) -> Result<ModelGraph, ResolveError> {
    let Some(SubsystemDef::Reference { target, .. }) = &graph.sut else {
        return Ok(graph.clone());
    };
    let mut chain = Vec::new();
    if let Some(src) = &graph.source {
        chain.push(format!("{}#sut", canonical(src).display()));
    }
    let mut sut = load(target, search_path, &mut chain)?;
    sut.name = target.name.clone();
    if let Some(fixture) = &graph.fixture {
        check_fixture_ports(fixture, &sut).map_err(ResolveError::Invalid)?;
    }
    let mut out = graph.clone();
    out.sut = Some(SubsystemDef::Inline(sut));
    Ok(out)
}

fn canonical(p: &Path) -> PathBuf {
    p.canonicalize().unwrap_or_else(|_| p.to_path_buf())
}

fn locate(path: &str, search_path: &[PathBuf]) -> Option<PathBuf> {
    let p = Path::new(path);
    if p.is_absolute() {
        return p.is_file().then(|| p.to_path_buf());
    }
    search_path.iter().map(|dir| dir.join(p)).find(|c| c.is_file())
}

fn load(
    target: &ModelRef,
    search_path: &[PathBuf],
    chain: &mut Vec<String>,
) -> Result<Subsystem, ResolveError> {
    let file = locate(&target.path, search_path).ok_or_else(|| ResolveError::NotFound {
        path: target.path.clone(),
    })?;
    let key = format!("{}#{}", canonical(&file).display(), target.name);
    if chain.contains(&key) {
        chain.push(key);
        return Err(ResolveError::Cycle { chain: chain.clone() });
    }
    chain.push(key);

    let graph = parse_model_file(&file).map_err(|error| ResolveError::Parse {
        path: target.path.clone(),
        error,
    })?;
    let def = if target.name == "sut" {
        graph.sut.as_ref()
    } else {
        graph.subsystem(&target.name)
    };
    let def = def.ok_or_else(|| ResolveError::MissingSubsystem {
        path: target.path.clone(),
        name: target.name.clone(),
    })?;
    match def {
        SubsystemDef::Inline(s) => Ok(s.clone()),
        SubsystemDef::Reference { target: next, .. } => {
            let mut nested = Vec::with_capacity(search_path.len() + 1);
            if let Some(dir) = file.parent() {
                nested.push(dir.to_path_buf());
            }
            nested.extend(search_path.iter().cloned());
            load(next, &nested, chain)
        }
    }
}
