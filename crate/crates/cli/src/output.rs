//! Output directory handling: one run per directory at a time, and no
//! partial artifacts left behind on failure.

use std::fs::{self, OpenOptions};
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use crate::RunError;

pub const LOCK_NAME: &str = ".caloric.lock";

/// Holds the directory lock; dropping it releases the lock and, unless the
/// run was committed, deletes what the run wrote.
pub struct OutputDir {
    root: PathBuf,
    created_root: bool,
    written: Vec<PathBuf>,
    committed: bool,
}

impl OutputDir {
    pub fn acquire(root: &Path) -> Result<Self, RunError> {
        let created_root = !root.exists();
        fs::create_dir_all(root)
            .map_err(|e| RunError::invalid(format!("cannot create {}: {e}", root.display())))?;
        let lock = root.join(LOCK_NAME);
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(_) => Ok(Self {
                root: root.to_path_buf(),
                created_root,
                written: Vec::new(),
                committed: false,
            }),
            Err(e) => {
                if created_root {
                    let _ = fs::remove_dir(root);
                }
                Err(if e.kind() == ErrorKind::AlreadyExists {
                    RunError::invalid(format!(
                        "{} is locked by another run (remove {} if stale)",
                        root.display(),
                        lock.display()
                    ))
                } else {
                    RunError::invalid(format!("cannot lock {}: {e}", root.display()))
                })
            }
        }
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), RunError> {
        let path = self.root.join(name);
        // Record before writing so a half-written file is also cleaned up.
        self.written.push(path.clone());
        fs::write(&path, contents)
            .map_err(|e| RunError::invalid(format!("cannot write {}: {e}", path.display())))
    }

    pub fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        if !self.committed {
            for path in &self.written {
                let _ = fs::remove_file(path);
            }
        }
        let _ = fs::remove_file(self.root.join(LOCK_NAME));
        if !self.committed && self.created_root {
            let _ = fs::remove_dir(&self.root);
        }
    }
}
