//! Continuous integration: polls versioned components, records virtual
//! revisions over the main project and its externals, and runs the action
//! pipeline once per virtual revision.

mod config;
mod history;
mod notify;
mod pipeline;
mod store;
mod vcs;

use std::thread;

use thiserror::Error;

pub use config::{Action, CiConfig, ComponentRef, ConfigError, NotifyConfig, Role, DEFAULT_INTERVAL_S, STORE_ENV};
pub use history::{history, index_html, write_index, HistoryRow, RunState};
pub use notify::{subject, write_notification};
pub use pipeline::{run_pipeline, ActionRecord, ActionStatus, PipelineRun, RunCounts, ADAPTER_DIR};
pub use store::{RevisionMap, Store, StoreError, VirtualRevision};
pub use vcs::{copy_tree, JournalRepo, Vcs, VcsError};

#[derive(Debug, Error)]
pub enum CiError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("poll failed: {0}")]
    Poll(#[from] VcsError),
}

/// Current revision of every component, keyed by name.
pub fn poll(components: &[ComponentRef]) -> Result<RevisionMap, VcsError> {
    components
        .iter()
        .map(|c| {
            let repo = JournalRepo {
                name: c.name.clone(),
                location: c.location.clone(),
            };
            repo.current_revision().map(|r| (c.name.clone(), r))
        })
        .collect()
}

#[derive(Debug, Default)]
pub struct TickOutcome {
    /// Runs re-executed because an earlier attempt was interrupted.
    pub resumed: Vec<u64>,
    pub created: Option<VirtualRevision>,
    pub runs: Vec<PipelineRun>,
}

pub struct Daemon {
    pub config: CiConfig,
    pub store: Store,
}

impl Daemon {
    pub fn new(config: CiConfig) -> Result<Self, StoreError> {
        let store = Store::open(&config.store)?;
        Ok(Daemon { config, store })
    }

    /// One control-loop iteration: finish interrupted runs, poll, and run
    /// the pipeline if the virtual revision changed.
    pub fn tick(&self) -> Result<TickOutcome, CiError> {
        let mut out = TickOutcome::default();
        for v in self.store.incomplete()? {
            log::info!("re-running interrupted pipeline for vid {}", v.vid);
            out.resumed.push(v.vid);
            out.runs.push(run_pipeline(&v, &self.config, &self.store));
        }
        let current = poll(&self.config.components);
        let current = match current {
            Ok(c) => c,
            Err(e) => {
                self.refresh_index();
                return Err(e.into());
            }
        };
        if let Some(v) = self.store.next_virtual_revision(&current)? {
            log::info!("new virtual revision {}: {}", v.vid, v.tuple());
            out.runs.push(run_pipeline(&v, &self.config, &self.store));
            out.created = Some(v);
        }
        self.refresh_index();
        Ok(out)
    }

    fn refresh_index(&self) {
        if let Err(e) = write_index(&self.store) {
            log::warn!("{e}");
        }
    }

    /// Ticks forever. Poll failures are logged and retried next interval;
    /// store corruption stops the loop.
    pub fn run(&self) -> Result<(), StoreError> {
        loop {
            match self.tick() {
                Ok(_) => {}
                Err(CiError::Poll(e)) => log::warn!("{e}; retrying in {:?}", self.config.interval),
                Err(CiError::Store(e)) => return Err(e),
            }
            thread::sleep(self.config.interval);
        }
    }
}
