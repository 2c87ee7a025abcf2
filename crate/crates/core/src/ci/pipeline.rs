use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use super::config::{Action, CiConfig};
use super::notify::write_notification;
use super::store::{RevisionMap, Store, VirtualRevision};
use super::vcs::{JournalRepo, Vcs};
use crate::coverage::{CoverageMap, CoverageSession};
use crate::report::{self, overview_file_name, ResultsDocument};
use crate::results::{elapsed_ms, now, Counts, SuiteResult};
use crate::rungen::{execute_manifest, generate_adapters, generate_runner, scan, RunnerManifest};
use crate::slrunner::run_suite;
use crate::testdsl::Runtime;

/// Directory inside the workspace receiving generated adapter suites.
pub const ADAPTER_DIR: &str = "_adapters";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionStatus {
    Ok,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub action: String,
    pub status: ActionStatus,
    pub duration_ms: u64,
    pub log: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RunCounts {
    pub passed: usize,
    pub failed: usize,
    pub error: usize,
}

impl From<Counts> for RunCounts {
    fn from(c: Counts) -> Self {
        RunCounts {
            passed: c.passed,
            failed: c.failed,
            error: c.error,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineRun {
    pub vid: u64,
    pub revisions: RevisionMap,
    pub actions: Vec<ActionRecord>,
    /// Overview page, relative to the store root.
    pub report: Option<String>,
    pub counts: Option<RunCounts>,
    pub notification: Option<String>,
}

impl PipelineRun {
    pub fn action(&self, a: Action) -> Option<&ActionRecord> {
        self.actions.iter().find(|r| r.action == a.as_str())
    }

    pub fn succeeded(&self) -> bool {
        self.actions.iter().all(|a| a.status == ActionStatus::Ok)
    }
}

struct Ctx<'a> {
    cfg: &'a CiConfig,
    store: &'a Store,
    vrev: &'a VirtualRevision,
    work: PathBuf,
    manifest: Option<RunnerManifest>,
    build_suites: Vec<SuiteResult>,
    session: Option<Arc<CoverageSession>>,
    suites: Option<Vec<SuiteResult>>,
    coverage: Option<CoverageMap>,
    started: Instant,
    timestamp: chrono::DateTime<chrono::Utc>,
    run: PipelineRun,
}

type Step = Result<String, String>;

fn relative_to(s: &str, root: &Path) -> String {
    match Path::new(s).strip_prefix(root) {
        Ok(rel) => rel.to_string_lossy().replace('\\', "/"),
        Err(_) => s.to_string(),
    }
}

/// Rewrites workspace paths in results relative to the workspace so reports
/// do not depend on where the store lives.
fn relativize(suites: &mut [SuiteResult], root: &Path) {
    for s in suites {
        s.source_file = relative_to(&s.source_file, root);
        for c in &mut s.cases {
            for m in &mut c.messages {
                if let Some(f) = &mut m.file {
                    *f = relative_to(f, root);
                }
            }
        }
    }
}

impl Ctx<'_> {
    fn checkout(&mut self) -> Step {
        let mut log = Vec::new();
        for c in &self.cfg.components {
            let rev = self
                .vrev
                .revisions
                .get(&c.name)
                .ok_or_else(|| format!("component `{}` missing from virtual revision", c.name))?;
            let repo = JournalRepo {
                name: c.name.clone(),
                location: c.location.clone(),
            };
            repo.checkout(rev, &self.work.join(&c.name)).map_err(|e| e.to_string())?;
            log.push(format!("{}@{rev}", c.name));
        }
        Ok(log.join("\n"))
    }

    fn build(&mut self) -> Step {
        if !self.work.is_dir() {
            return Err("workspace missing; checkout did not run".into());
        }
        let mut log = Vec::new();
        let adapters = generate_adapters(&self.work, &self.work.join(ADAPTER_DIR)).map_err(|e| e.to_string())?;
        for (file, msg) in &adapters.diagnostics {
            log.push(format!("skipped model {}: {msg}", relative_to(&file.display().to_string(), &self.work)));
        }
        log.push(format!("{} adapter files", adapters.written.len()));
        let manifest = scan(std::slice::from_ref(&self.work));
        generate_runner(&manifest, &self.work.join("runner.manifest")).map_err(|e| e.to_string())?;
        log.push(format!("{} test methods", manifest.entries.len()));
        let failed = !manifest.diagnostics.is_empty();
        for d in &manifest.diagnostics {
            log.push(format!("{}: {}", relative_to(&d.file.display().to_string(), &self.work), d.message));
        }
        if failed {
            let only_diag = RunnerManifest {
                entries: Vec::new(),
                ..manifest.clone()
            };
            let mut suites = execute_manifest(&only_diag, &mut Runtime::new());
            relativize(&mut suites, &self.work);
            self.build_suites = suites;
        }
        self.manifest = Some(manifest);
        if failed {
            Err(log.join("\n"))
        } else {
            Ok(log.join("\n"))
        }
    }

    fn test(&mut self) -> Step {
        let manifest = self.manifest.as_ref().ok_or("no runner manifest; build did not run")?;
        let session = Arc::new(CoverageSession::new());
        let mut rt = if self.cfg.actions.contains(&Action::Coverage) {
            Runtime::with_coverage(session.clone())
        } else {
            Runtime::new()
        };
        let mut suites = execute_manifest(manifest, &mut rt);
        let models: Vec<PathBuf> = WalkDir::new(&self.work)
            .sort_by_file_name()
            .into_iter()
            .filter_map(Result::ok)
            .filter(|e| e.file_type().is_file() && e.path().extension().is_some_and(|x| x == "bdm"))
            .map(|e| e.into_path())
            .collect();
        suites.extend(models.par_iter().map(|p| run_suite(p)).collect::<Vec<_>>());
        relativize(&mut suites, &self.work);
        let c = crate::results::total_counts(&suites);
        self.session = Some(session);
        self.suites = Some(suites);
        Ok(format!(
            "{} tests: {} passed, {} failed, {} errors",
            c.total(),
            c.passed,
            c.failed,
            c.error
        ))
    }

    fn coverage(&mut self) -> Step {
        let session = self.session.as_ref().ok_or("no test execution to measure")?;
        let mut map = session.summarize().map;
        for f in &mut map.files {
            f.name = relative_to(&f.name, &self.work);
        }
        map.files.sort_by(|a, b| a.name.cmp(&b.name));
        let log = format!("{:.1}% of {} statements", map.percent(), map.instrumentable());
        self.coverage = Some(map);
        Ok(log)
    }

    fn report(&mut self) -> Step {
        let suites = self.suites.clone().unwrap_or_else(|| self.build_suites.clone());
        let doc = ResultsDocument {
            revision: Some(self.vrev.vid),
            timestamp: self.timestamp,
            duration_ms: elapsed_ms(self.started),
            suites,
            coverage: self.coverage.clone(),
        };
        let name = format!("vid{}", self.vrev.vid);
        let dir = self.store.report_dir(self.vrev.vid);
        let files = report::publish_rooted(&doc, &name, self.cfg.verbosity, &dir, &self.work)
            .map_err(|e| format!("cannot write report: {e}"))?;
        let overview = dir.join(overview_file_name(&name));
        self.run.report = Some(relative_to(&overview.display().to_string(), self.store.root()));
        self.run.counts = Some(doc.counts().into());
        Ok(format!("{} files in {}", files.len(), dir.display()))
    }

    fn notify(&mut self) -> Step {
        if !self.cfg.notify.enabled {
            return Ok("disabled".into());
        }
        let report = self.run.report.as_ref().map(|r| self.store.root().join(r));
        let path = write_notification(&self.run, &self.cfg.notify, report.as_deref())
            .map_err(|e| format!("cannot write notification: {e}"))?;
        self.run.notification = Some(path.display().to_string());
        Ok(format!("wrote {}", path.display()))
    }

    fn cleanup(&mut self) -> Step {
        if self.work.exists() {
            fs::remove_dir_all(&self.work).map_err(|e| format!("cannot remove workspace: {e}"))?;
        }
        Ok("workspace removed".into())
    }
}

/// Runs the configured actions for `vrev` in order. Faults never escape;
/// they become action statuses. After a failure only report, notify and
/// cleanup still run.
pub fn run_pipeline(vrev: &VirtualRevision, cfg: &CiConfig, store: &Store) -> PipelineRun {
    let mut ctx = Ctx {
        cfg,
        store,
        vrev,
        work: store.work_dir(vrev.vid),
        manifest: None,
        build_suites: Vec::new(),
        session: None,
        suites: None,
        coverage: None,
        started: Instant::now(),
        timestamp: now(),
        run: PipelineRun {
            vid: vrev.vid,
            revisions: vrev.revisions.clone(),
            actions: Vec::new(),
            report: None,
            counts: None,
            notification: None,
        },
    };
    if let Err(e) = store.begin_run(vrev.vid) {
        ctx.run.actions.push(ActionRecord {
            action: "setup".into(),
            status: ActionStatus::Failed,
            duration_ms: 0,
            log: e.to_string(),
        });
        return ctx.run;
    }
    let mut failed = false;
    for &action in &cfg.actions {
        if failed && !action.always_runs() {
            ctx.run.actions.push(ActionRecord {
                action: action.to_string(),
                status: ActionStatus::Skipped,
                duration_ms: 0,
                log: String::new(),
            });
            continue;
        }
        let start = Instant::now();
        let outcome = match action {
            Action::Checkout => ctx.checkout(),
            Action::Build => ctx.build(),
            Action::Test => ctx.test(),
            Action::Coverage => ctx.coverage(),
            Action::Report => ctx.report(),
            Action::Notify => ctx.notify(),
            Action::Cleanup => ctx.cleanup(),
        };
        let (status, log) = match outcome {
            Ok(log) => (ActionStatus::Ok, log),
            Err(log) => {
                log::warn!("vid {}: {action} failed: {log}", vrev.vid);
                failed = true;
                (ActionStatus::Failed, log)
            }
        };
        ctx.run.actions.push(ActionRecord {
            action: action.to_string(),
            status,
            duration_ms: elapsed_ms(start),
            log,
        });
    }
    if let Err(e) = store.finish_run(&ctx.run) {
        log::error!("vid {}: {e}", vrev.vid);
    }
    ctx.run
}
