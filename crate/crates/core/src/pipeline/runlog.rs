use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use parking_lot::Mutex;
use thiserror::Error;

use super::RunRecord;

#[derive(Debug, Error)]
pub enum RunLogError {
    #[error("run log {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("run log {path}, line {line}: {message}")]
    Malformed { path: String, line: usize, message: String },
}

/// Append-only JSON Lines file with one [`RunRecord`] per line.
#[derive(Debug)]
pub struct RunLog {
    path: PathBuf,
    write: Mutex<()>,
}

impl RunLog {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into(), write: Mutex::new(()) }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn io(&self, source: io::Error) -> RunLogError {
        RunLogError::Io { path: self.path.display().to_string(), source }
    }

    pub fn append(&self, record: &RunRecord) -> Result<(), RunLogError> {
        let line = serde_json::to_string(record).expect("run records serialize");
        let _guard = self.write.lock();
        if let Some(parent) = self.path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| self.io(e))?;
        }
        let mut file = OpenOptions::new().create(true).append(true).open(&self.path).map_err(|e| self.io(e))?;
        file.write_all(format!("{line}\n").as_bytes()).map_err(|e| self.io(e))
    }

    /// All records in file order. A missing file is an empty log.
    pub fn load(&self) -> Result<Vec<RunRecord>, RunLogError> {
        let text = match fs::read_to_string(&self.path) {
            Ok(text) => text,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(self.io(e)),
        };
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| RunLogError::Malformed {
                    path: self.path.display().to_string(),
                    line: i + 1,
                    message: e.to_string(),
                })
            })
            .collect()
    }

    pub fn find(&self, run_id: &str) -> Result<Option<RunRecord>, RunLogError> {
        Ok(self.load()?.into_iter().rev().find(|r| r.run_id == run_id))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{RunStatus, TimingLog};

    fn record(id: &str) -> RunRecord {
        RunRecord {
            run_id: id.into(),
            prompt: "p".into(),
            started_at: chrono::Utc::now(),
            entities: None,
            project: None,
            language: None,
            loc: None,
            status: RunStatus::Failed,
            failure_category: Some(crate::pipeline::FailureCategory::AmbiguousPrompt),
            failure_stage: None,
            failure_message: None,
            lock_timeout: false,
            timing: TimingLog::default(),
            coverage_overall: None,
            passed: 0,
            failed: 0,
            report_path: None,
            run_dir: None,
        }
    }

    #[test]
    fn append_then_load() {
        let dir = tempfile::tempdir().unwrap();
        let log = RunLog::new(dir.path().join("nested/runs.jsonl"));
        assert!(log.load().unwrap().is_empty());
        log.append(&record("a")).unwrap();
        log.append(&record("b")).unwrap();
        let loaded = log.load().unwrap();
        assert_eq!(loaded, vec![record_with_time("a", &loaded[0]), record_with_time("b", &loaded[1])]);
        assert_eq!(log.find("b").unwrap().unwrap().run_id, "b");
        assert!(log.find("zzz").unwrap().is_none());
    }

    fn record_with_time(id: &str, like: &RunRecord) -> RunRecord {
        RunRecord { started_at: like.started_at, ..record(id) }
    }

    #[test]
    fn malformed_line_reports_its_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("runs.jsonl");
        fs::write(&path, format!("{}\n\nnot json\n", serde_json::to_string(&record("a")).unwrap())).unwrap();
        match RunLog::new(&path).load() {
            Err(RunLogError::Malformed { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
