use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    EntityRetrieval,
    FolderLocation,
    TestGeneration,
    DotGraph,
    WriteTests,
    TestExecution,
    PdfReport,
}

impl Stage {
    /// Execution order.
    pub const ALL: [Stage; 7] = [
        Stage::EntityRetrieval,
        Stage::FolderLocation,
        Stage::TestGeneration,
        Stage::DotGraph,
        Stage::WriteTests,
        Stage::TestExecution,
        Stage::PdfReport,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::EntityRetrieval => "entity_retrieval",
            Stage::FolderLocation => "folder_location",
            Stage::TestGeneration => "test_generation",
            Stage::DotGraph => "dot_graph",
            Stage::WriteTests => "write_tests",
            Stage::TestExecution => "test_execution",
            Stage::PdfReport => "pdf_report",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Stage::EntityRetrieval => "Entity Retrieval",
            Stage::FolderLocation => "Folder Location",
            Stage::TestGeneration => "Tests Gen.",
            Stage::DotGraph => "Dot Graph",
            Stage::WriteTests => "Write Tests",
            Stage::TestExecution => "Test Exec.",
            Stage::PdfReport => "PDF Report",
        }
    }

    fn index(self) -> usize {
        Stage::ALL.iter().position(|s| *s == self).unwrap()
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One timed stage. Offsets are microseconds since the run started.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: Stage,
    pub start_us: u64,
    pub end_us: u64,
}

impl StageTiming {
    pub fn duration_us(&self) -> u64 {
        self.end_us - self.start_us
    }

    pub fn duration_ms(&self) -> f64 {
        self.duration_us() as f64 / 1000.0
    }
}

/// Per-stage durations of one run, in execution order. Failed runs keep the
/// stages that ran, including the one that failed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimingLog {
    pub stages: Vec<StageTiming>,
    pub total_us: u64,
}

impl TimingLog {
    pub fn get(&self, stage: Stage) -> Option<&StageTiming> {
        self.stages.iter().find(|s| s.stage == stage)
    }

    pub fn duration_ms(&self, stage: Stage) -> Option<f64> {
        self.get(stage).map(StageTiming::duration_ms)
    }

    pub fn total_ms(&self) -> f64 {
        self.total_us as f64 / 1000.0
    }

    pub fn stage_sum_us(&self) -> u64 {
        self.stages.iter().map(StageTiming::duration_us).sum()
    }

    pub fn is_complete(&self) -> bool {
        self.stages.len() == Stage::ALL.len()
    }

    /// Builds a log from durations in seconds laid end to end, for imported
    /// measurements. `total_s` must cover the stage sum.
    pub fn from_seconds(durations: &[(Stage, f64)], total_s: f64) -> Self {
        let us = |s: f64| (s * 1_000_000.0).round() as u64;
        let mut cursor = 0;
        let stages = durations
            .iter()
            .map(|&(stage, secs)| {
                let start_us = cursor;
                cursor += us(secs);
                StageTiming { stage, start_us, end_us: cursor }
            })
            .collect();
        TimingLog { stages, total_us: us(total_s).max(cursor) }
    }

    /// Stages appear at most once and in execution order, never overlap, and
    /// fit inside the total.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut prev: Option<&StageTiming> = None;
        for t in &self.stages {
            if t.end_us < t.start_us {
                return Err(format!("{} ends before it starts", t.stage));
            }
            if let Some(p) = prev {
                if t.stage.index() <= p.stage.index() {
                    return Err(format!("{} recorded after {}", t.stage, p.stage));
                }
                if t.start_us < p.end_us {
                    return Err(format!("{} starts before {} completes", t.stage, p.stage));
                }
            }
            prev = Some(t);
        }
        if self.total_us < self.stage_sum_us() {
            return Err(format!("total {}us is below the stage sum {}us", self.total_us, self.stage_sum_us()));
        }
        if let Some(last) = prev {
            if self.total_us < last.end_us {
                return Err("total ends before the last stage".into());
            }
        }
        Ok(())
    }
}

/// Records stage offsets against one monotonic origin.
#[derive(Debug)]
pub struct StageClock {
    origin: Instant,
    log: TimingLog,
}

impl StageClock {
    pub fn start() -> Self {
        Self { origin: Instant::now(), log: TimingLog::default() }
    }

    fn now_us(&self) -> u64 {
        self.origin.elapsed().as_micros() as u64
    }

    pub fn time<T>(&mut self, stage: Stage, f: impl FnOnce() -> T) -> T {
        let start_us = self.now_us();
        let out = f();
        let end_us = self.now_us();
        self.log.stages.push(StageTiming { stage, start_us, end_us });
        out
    }

    /// Snapshot of the stages timed so far, with the total up to now.
    pub fn snapshot(&self) -> TimingLog {
        TimingLog { stages: self.log.stages.clone(), total_us: self.now_us() }
    }

    pub fn finish(mut self) -> TimingLog {
        self.log.total_us = self.now_us();
        self.log
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clock_produces_ordered_log() {
        let mut clock = StageClock::start();
        for stage in Stage::ALL {
            clock.time(stage, || std::thread::sleep(std::time::Duration::from_millis(1)));
        }
        let log = clock.finish();
        assert!(log.is_complete());
        log.check_invariants().unwrap();
        assert!(log.total_us >= log.stage_sum_us());
    }

    #[test]
    fn imported_seconds() {
        let log = TimingLog::from_seconds(&[(Stage::EntityRetrieval, 1.44), (Stage::TestGeneration, 92.54)], 119.06);
        assert_eq!(log.duration_ms(Stage::TestGeneration), Some(92540.0));
        assert_eq!(log.total_ms(), 119060.0);
        log.check_invariants().unwrap();
    }

    #[test]
    fn invariant_violations() {
        let t = |stage, start_us, end_us| StageTiming { stage, start_us, end_us };
        let overlapping =
            TimingLog { stages: vec![t(Stage::EntityRetrieval, 0, 10), t(Stage::FolderLocation, 5, 12)], total_us: 20 };
        assert!(overlapping.check_invariants().is_err());
        let reordered =
            TimingLog { stages: vec![t(Stage::DotGraph, 0, 1), t(Stage::TestGeneration, 1, 2)], total_us: 2 };
        assert!(reordered.check_invariants().is_err());
        let short_total = TimingLog { stages: vec![t(Stage::EntityRetrieval, 0, 10)], total_us: 9 };
        assert!(short_total.check_invariants().is_err());
    }
}
