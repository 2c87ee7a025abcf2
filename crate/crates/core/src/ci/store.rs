//! On-disk store: the virtual-revision journal `state` plus one directory per
//! virtual revision holding `run.json`, `report/` and the transient `work/`.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use thiserror::Error;

use super::pipeline::PipelineRun;
use crate::results::now;

pub type RevisionMap = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VirtualRevision {
    pub vid: u64,
    pub revisions: RevisionMap,
    pub observed_at: DateTime<Utc>,
}

impl VirtualRevision {
    pub fn tuple(&self) -> String {
        self.revisions
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store corrupted: {path} line {line}: {message}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("store I/O on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

const RUNNING: &str = "RUNNING";

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn open(root: &Path) -> Result<Self, StoreError> {
        fs::create_dir_all(root).map_err(io_at(root))?;
        Ok(Store {
            root: std::path::absolute(root).map_err(io_at(root))?,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn state_path(&self) -> PathBuf {
        self.root.join("state")
    }

    pub fn run_dir(&self, vid: u64) -> PathBuf {
        self.root.join(vid.to_string())
    }

    pub fn work_dir(&self, vid: u64) -> PathBuf {
        self.run_dir(vid).join("work")
    }

    pub fn report_dir(&self, vid: u64) -> PathBuf {
        self.run_dir(vid).join("report")
    }

    /// All stored virtual revisions, validated: vids run 1, 2, ... and
    /// consecutive tuples differ.
    pub fn revisions(&self) -> Result<Vec<VirtualRevision>, StoreError> {
        let path = self.state_path();
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(io_at(&path)(e)),
        };
        let mut out: Vec<VirtualRevision> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let corrupt = |message: String| StoreError::Corrupt {
                path: path.clone(),
                line: i + 1,
                message,
            };
            let cols: Vec<&str> = line.split('\t').collect();
            let [vid, tuple, observed] = cols[..] else {
                return Err(corrupt("expected 3 tab-separated fields".into()));
            };
            let vid: u64 = vid.parse().map_err(|_| corrupt(format!("bad vid `{vid}`")))?;
            if vid != out.len() as u64 + 1 {
                return Err(corrupt(format!("expected vid {}, found {vid}", out.len() + 1)));
            }
            let mut revisions = RevisionMap::new();
            for pair in tuple.split(',').filter(|p| !p.is_empty()) {
                let (k, v) = pair
                    .split_once('=')
                    .ok_or_else(|| corrupt(format!("bad revision pair `{pair}`")))?;
                revisions.insert(k.to_string(), v.to_string());
            }
            if out.last().is_some_and(|p| p.revisions == revisions) {
                return Err(corrupt(format!("vid {vid} repeats the previous tuple")));
            }
            let observed_at = DateTime::parse_from_rfc3339(observed)
                .map_err(|_| corrupt(format!("bad timestamp `{observed}`")))?
                .with_timezone(&Utc);
            out.push(VirtualRevision {
                vid,
                revisions,
                observed_at,
            });
        }
        Ok(out)
    }

    fn write_state(&self, revs: &[VirtualRevision]) -> Result<(), StoreError> {
        let mut text = String::new();
        for r in revs {
            text.push_str(&format!(
                "{}\t{}\t{}\n",
                r.vid,
                r.tuple(),
                r.observed_at.to_rfc3339_opts(SecondsFormat::Secs, true)
            ));
        }
        let path = self.state_path();
        let tmp = self.root.join("state.tmp");
        fs::write(&tmp, text).map_err(io_at(&tmp))?;
        fs::rename(&tmp, &path).map_err(io_at(&path))
    }

    /// Records `current` as a new virtual revision if it differs from the
    /// last stored tuple.
    pub fn next_virtual_revision(&self, current: &RevisionMap) -> Result<Option<VirtualRevision>, StoreError> {
        let mut revs = self.revisions()?;
        if revs.last().is_some_and(|r| &r.revisions == current) {
            return Ok(None);
        }
        let v = VirtualRevision {
            vid: revs.len() as u64 + 1,
            revisions: current.clone(),
            observed_at: now(),
        };
        revs.push(v.clone());
        self.write_state(&revs)?;
        Ok(Some(v))
    }

    /// Creates the run directory and the in-progress marker. Leftovers of
    /// an interrupted earlier attempt are removed first.
    pub fn begin_run(&self, vid: u64) -> Result<(), StoreError> {
        let dir = self.run_dir(vid);
        for sub in [self.work_dir(vid), self.report_dir(vid)] {
            if sub.exists() {
                fs::remove_dir_all(&sub).map_err(io_at(&sub))?;
            }
        }
        let _ = fs::remove_file(dir.join("run.json"));
        fs::create_dir_all(&dir).map_err(io_at(&dir))?;
        fs::write(dir.join(RUNNING), "").map_err(io_at(&dir))
    }

    pub fn finish_run(&self, run: &PipelineRun) -> Result<(), StoreError> {
        let dir = self.run_dir(run.vid);
        let path = dir.join("run.json");
        let tmp = dir.join("run.json.tmp");
        let json = serde_json::to_string_pretty(run).map_err(|e| io_at(&path)(io::Error::other(e)))?;
        fs::write(&tmp, json + "\n").map_err(io_at(&tmp))?;
        fs::rename(&tmp, &path).map_err(io_at(&path))?;
        fs::remove_file(dir.join(RUNNING)).or_else(ignore_missing).map_err(io_at(&dir))
    }

    pub fn is_running(&self, vid: u64) -> bool {
        self.run_dir(vid).join(RUNNING).exists()
    }

    pub fn load_run(&self, vid: u64) -> Option<PipelineRun> {
        if self.is_running(vid) {
            return None;
        }
        let text = fs::read_to_string(self.run_dir(vid).join("run.json")).ok()?;
        serde_json::from_str(&text).ok()
    }

    /// Stored revisions whose pipeline never completed.
    pub fn incomplete(&self) -> Result<Vec<VirtualRevision>, StoreError> {
        Ok(self
            .revisions()?
            .into_iter()
            .filter(|r| self.load_run(r.vid).is_none())
            .collect())
    }
}

fn ignore_missing(e: io::Error) -> io::Result<()> {
    if e.kind() == io::ErrorKind::NotFound {
        Ok(())
    } else {
        Err(e)
    }
}

fn io_at(path: &Path) -> impl FnOnce(io::Error) -> StoreError {
    let path = path.to_path_buf();
    move |source| StoreError::Io { path, source }
}
