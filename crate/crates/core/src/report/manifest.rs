use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ReportError, TestReport};
use crate::language::TargetLanguage;
use crate::pipeline::{FailureCategory, RunStatus, TimingLog};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Machine-readable summary written next to the report and returned by the
/// service. Stage timings are in milliseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub status: RunStatus,
    pub failure_category: Option<FailureCategory>,
    pub failure_message: Option<String>,
    pub project: Option<String>,
    pub language: Option<TargetLanguage>,
    pub coverage_overall: Option<f64>,
    pub passed: usize,
    pub failed: usize,
    pub report_path: Option<PathBuf>,
    pub stage_timings_ms: BTreeMap<String, f64>,
    pub total_ms: f64,
}

pub(crate) fn timings_ms(timing: &TimingLog) -> BTreeMap<String, f64> {
    timing.stages.iter().map(|t| (t.stage.as_str().to_string(), t.duration_ms())).collect()
}

/// Summary of a composed report. A composed report means every earlier stage
/// succeeded, so the status is success.
pub fn report_manifest(report: &TestReport) -> RunManifest {
    RunManifest {
        run_id: report.run_id.clone(),
        status: RunStatus::Success,
        failure_category: None,
        failure_message: None,
        project: None,
        language: None,
        coverage_overall: Some(report.coverage_section.overall.percent),
        passed: report.results_section.passed,
        failed: report.results_section.failed,
        report_path: Some(report.output_path.clone()),
        stage_timings_ms: timings_ms(&report.timing_appendix),
        total_ms: report.timing_appendix.total_ms(),
    }
}

pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<PathBuf, ReportError> {
    fs::create_dir_all(dir).map_err(|e| ReportError::io(dir, e))?;
    let path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(manifest).map_err(|e| ReportError::Encoding(e.to_string()))?;
    fs::write(&path, json + "\n").map_err(|e| ReportError::io(&path, e))?;
    Ok(path)
}

pub fn read_manifest(path: &Path) -> Result<RunManifest, ReportError> {
    let text = fs::read_to_string(path).map_err(|e| ReportError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| ReportError::Encoding(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::callgraph::GraphRendering;
    use crate::report::compose_report;
    use crate::runner::{CoverageRecord, CoverageSummary, TestRunOutcome, TestStatus};

    #[test]
    fn manifest_carries_counts_and_coverage_and_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let outcomes: Vec<_> = (0..4)
            .map(|i| TestRunOutcome {
                test_id: format!("t{i}"),
                status: TestStatus::Passed,
                failure_detail: None,
                duration_ms: 1,
            })
            .collect();
        let coverage = CoverageSummary::from_records(vec![CoverageRecord::new("experiment.py", 143, 2).unwrap()]);
        let graph = GraphRendering::EmbeddedDot { dot_text: "digraph {\n}\n".into(), note: None };
        let report =
            compose_report("r1", &[], &outcomes, &coverage, &graph, &TimingLog::default(), dir.path()).unwrap();
        let manifest = report_manifest(&report);
        assert_eq!((manifest.passed, manifest.failed), (4, 0));
        assert_eq!(manifest.coverage_overall, Some(98.60));
        assert_eq!(manifest.status, RunStatus::Success);
        let path = write_manifest(dir.path(), &manifest).unwrap();
        assert_eq!(read_manifest(&path).unwrap(), manifest);
    }
}
