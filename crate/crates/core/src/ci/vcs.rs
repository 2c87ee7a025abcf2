//! Version-control adapters. The journal adapter reads a directory holding a
//! `HEAD` file with the current revision id and `revisions/<id>/` snapshots.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;
use walkdir::WalkDir;

#[derive(Debug, Error)]
pub enum VcsError {
    #[error("component `{component}`: {message}")]
    Unreachable { component: String, message: String },
    #[error("component `{component}`: revision `{revision}` not found")]
    NoSuchRevision { component: String, revision: String },
    #[error("component `{component}`: checkout failed: {source}")]
    Checkout {
        component: String,
        #[source]
        source: io::Error,
    },
}

pub trait Vcs {
    fn current_revision(&self) -> Result<String, VcsError>;
    /// Materializes `revision` into `dest`, replacing anything there.
    fn checkout(&self, revision: &str, dest: &Path) -> Result<(), VcsError>;
}

#[derive(Debug, Clone)]
pub struct JournalRepo {
    pub name: String,
    pub location: PathBuf,
}

fn valid_revision(r: &str) -> bool {
    !r.is_empty() && !r.contains(|c: char| c.is_whitespace() || c == ',' || c == '=' || c == '/' || c == '\\')
        && r != "."
        && r != ".."
}

impl Vcs for JournalRepo {
    fn current_revision(&self) -> Result<String, VcsError> {
        let head = self.location.join("HEAD");
        let text = fs::read_to_string(&head).map_err(|e| VcsError::Unreachable {
            component: self.name.clone(),
            message: format!("cannot read {}: {e}", head.display()),
        })?;
        let rev = text.trim().to_string();
        if !valid_revision(&rev) {
            return Err(VcsError::Unreachable {
                component: self.name.clone(),
                message: format!("invalid revision id `{rev}` in {}", head.display()),
            });
        }
        Ok(rev)
    }

    fn checkout(&self, revision: &str, dest: &Path) -> Result<(), VcsError> {
        let src = self.location.join("revisions").join(revision);
        if !valid_revision(revision) || !src.is_dir() {
            return Err(VcsError::NoSuchRevision {
                component: self.name.clone(),
                revision: revision.to_string(),
            });
        }
        let wrap = |source| VcsError::Checkout {
            component: self.name.clone(),
            source,
        };
        if dest.exists() {
            fs::remove_dir_all(dest).map_err(wrap)?;
        }
        copy_tree(&src, dest).map_err(wrap)
    }
}

pub fn copy_tree(src: &Path, dest: &Path) -> io::Result<()> {
    fs::create_dir_all(dest)?;
    for entry in WalkDir::new(src).min_depth(1).sort_by_file_name() {
        let entry = entry.map_err(io::Error::other)?;
        let rel = entry.path().strip_prefix(src).map_err(io::Error::other)?;
        let target = dest.join(rel);
        if entry.file_type().is_dir() {
            fs::create_dir_all(&target)?;
        } else {
            fs::copy(entry.path(), &target)?;
        }
    }
    Ok(())
}
