use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};
use std::time::Duration;

use parking_lot::{lock_api::ArcMutexGuard, Mutex, RawMutex};

/// Held while a run writes into and executes tests for one project.
pub type ProjectLockGuard = ArcMutexGuard<RawMutex, ()>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LockTimeout {
    pub root: PathBuf,
    pub waited: Duration,
}

/// Exclusive in-process locks keyed by canonical project root.
#[derive(Debug, Default)]
pub struct ProjectLocks {
    locks: Mutex<HashMap<PathBuf, Arc<Mutex<()>>>>,
}

impl ProjectLocks {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry shared by every pipeline in the process.
    pub fn global() -> Arc<ProjectLocks> {
        static GLOBAL: OnceLock<Arc<ProjectLocks>> = OnceLock::new();
        GLOBAL.get_or_init(|| Arc::new(ProjectLocks::new())).clone()
    }

    pub fn acquire(&self, project_root: &Path, timeout: Duration) -> Result<ProjectLockGuard, LockTimeout> {
        let key = project_root.canonicalize().unwrap_or_else(|_| project_root.to_path_buf());
        let lock = self.locks.lock().entry(key.clone()).or_default().clone();
        lock.try_lock_arc_for(timeout).ok_or(LockTimeout { root: key, waited: timeout })
    }
}
