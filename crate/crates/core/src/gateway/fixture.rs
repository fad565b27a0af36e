use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use super::{GatewayError, Provider};

/// One line of the fixture file (JSON Lines, field names are stable).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureRecord {
    pub request_key: String,
    pub provider: Provider,
    pub model: String,
    pub prompt: String,
    pub response_text: String,
    pub latency_ms: u64,
}

/// Append-only store of recorded exchanges. When a key occurs more than once
/// the last record wins.
#[derive(Debug)]
pub struct FixtureStore {
    path: PathBuf,
    records: RwLock<HashMap<String, FixtureRecord>>,
    order: RwLock<Vec<String>>,
    append_lock: Mutex<()>,
}

impl FixtureStore {
    /// Opens a store for recording; the file is created on first append.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let path = path.as_ref().to_path_buf();
        if path.exists() {
            Self::load(&path)
        } else {
            Ok(Self::empty(path))
        }
    }

    /// Loads an existing store; a missing file is an error.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let path = path.as_ref().to_path_buf();
        let err = |message: String| GatewayError::FixtureStore { path: path.display().to_string(), message };
        let file = fs::File::open(&path).map_err(|e| err(e.to_string()))?;
        let store = Self::empty(path.clone());
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| err(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: FixtureRecord =
                serde_json::from_str(&line).map_err(|e| err(format!("line {}: {e}", idx + 1)))?;
            store.insert(record);
        }
        Ok(store)
    }

    fn empty(path: PathBuf) -> Self {
        Self { path, records: RwLock::new(HashMap::new()), order: RwLock::new(Vec::new()), append_lock: Mutex::new(()) }
    }

    fn insert(&self, record: FixtureRecord) {
        let key = record.request_key.clone();
        if self.records.write().insert(key.clone(), record).is_none() {
            self.order.write().push(key);
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn get(&self, key: &str) -> Option<FixtureRecord> {
        self.records.read().get(key).cloned()
    }

    pub fn len(&self) -> usize {
        self.records.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Distinct records in first-seen order.
    pub fn records(&self) -> Vec<FixtureRecord> {
        let records = self.records.read();
        self.order.read().iter().filter_map(|k| records.get(k).cloned()).collect()
    }

    pub fn append(&self, record: FixtureRecord) -> Result<(), GatewayError> {
        let _guard = self.append_lock.lock();
        let err = |message: String| GatewayError::FixtureStore { path: self.path.display().to_string(), message };
        if let Some(parent) = self.path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| err(e.to_string()))?;
        }
        let mut line = serde_json::to_string(&record).map_err(|e| err(e.to_string()))?;
        line.push('\n');
        let mut file = OpenOptions::new().create(true).append(true).open(&self.path).map_err(|e| err(e.to_string()))?;
        file.write_all(line.as_bytes()).map_err(|e| err(e.to_string()))?;
        self.insert(record);
        Ok(())
    }
}
