//! Generators: the runner manifest built from DSL sources, and DSL adapter
//! suites built from model suites.

mod adapters;
mod manifest;

pub use adapters::{adapter_names, adapter_source, generate_adapters, AdapterError, AdapterOutcome, AdapterSpec, MARKER};
pub use manifest::{
    execute_manifest, generate_runner, manifest_string, parse_manifest, read_manifest, scan, Diagnostic,
    ManifestEntry, ManifestError, RunnerManifest, FORMAT_VERSION, HEADER,
};
