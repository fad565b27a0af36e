//! Final report: rationale, colored results, coverage table, call graph and a
//! timing appendix, written as a PDF plus a JSON manifest.

mod manifest;
mod pdf;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub(crate) use manifest::timings_ms as manifest_timings;
pub use manifest::{read_manifest, report_manifest, write_manifest, RunManifest, MANIFEST_FILE};
pub use pdf::extract_text;

use crate::callgraph::GraphRendering;
use crate::pipeline::TimingLog;
use crate::runner::{CoverageSummary, TestRunOutcome, TestStatus};
use crate::synth::TestRationale;

pub const REPORT_FILE: &str = "report.pdf";

/// Section headings in document order.
pub const SECTION_TITLES: [&str; 5] =
    ["Test Rationale", "Test Results", "Coverage Table", "Call Graph", "Appendix: Stage Timings"];

/// Row colors as RGB fractions.
pub const PASSED_RGB: (f32, f32, f32) = (0.13, 0.55, 0.13);
pub const FAILED_RGB: (f32, f32, f32) = (0.80, 0.10, 0.10);

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write report {path}: {message}")]
    Io { path: String, message: String },
    #[error("cannot encode report: {0}")]
    Encoding(String),
}

impl ReportError {
    fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        ReportError::Io { path: path.display().to_string(), message: err.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationaleGroup {
    pub source_file: String,
    pub entries: Vec<TestRationale>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub test_id: String,
    pub status: TestStatus,
    pub detail: Option<String>,
    pub color: (f32, f32, f32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsSection {
    pub rows: Vec<ResultRow>,
    pub passed: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub run_id: String,
    pub rationale_section: Vec<RationaleGroup>,
    pub results_section: ResultsSection,
    pub coverage_section: CoverageSummary,
    pub callgraph_section: GraphRendering,
    pub timing_appendix: TimingLog,
    pub output_path: PathBuf,
}

fn group_rationales(rationales: &[TestRationale]) -> Vec<RationaleGroup> {
    let mut groups: BTreeMap<&str, Vec<TestRationale>> = BTreeMap::new();
    for r in rationales {
        groups.entry(r.source_file.as_str()).or_default().push(r.clone());
    }
    groups
        .into_iter()
        .map(|(source, mut entries)| {
            entries.sort_by(|a, b| a.function_name.cmp(&b.function_name));
            RationaleGroup { source_file: source.to_string(), entries }
        })
        .collect()
}

fn results_section(outcomes: &[TestRunOutcome]) -> ResultsSection {
    let rows: Vec<ResultRow> = outcomes
        .iter()
        .map(|o| ResultRow {
            test_id: o.test_id.clone(),
            status: o.status,
            detail: o.failure_detail.clone(),
            color: match o.status {
                TestStatus::Passed => PASSED_RGB,
                TestStatus::Failed => FAILED_RGB,
            },
        })
        .collect();
    let failed = rows.iter().filter(|r| r.status == TestStatus::Failed).count();
    ResultsSection { passed: rows.len() - failed, failed, rows }
}

/// Builds the report and writes it to `<output_dir>/report.pdf`.
pub fn compose_report(
    run_id: &str,
    rationales: &[TestRationale],
    outcomes: &[TestRunOutcome],
    coverage: &CoverageSummary,
    graph: &GraphRendering,
    timing: &TimingLog,
    output_dir: &Path,
) -> Result<TestReport, ReportError> {
    fs::create_dir_all(output_dir).map_err(|e| ReportError::io(output_dir, e))?;
    let report = TestReport {
        run_id: run_id.to_string(),
        rationale_section: group_rationales(rationales),
        results_section: results_section(outcomes),
        coverage_section: coverage.clone(),
        callgraph_section: graph.clone(),
        timing_appendix: timing.clone(),
        output_path: output_dir.join(REPORT_FILE),
    };
    let bytes = pdf::render(&report)?;
    fs::write(&report.output_path, bytes).map_err(|e| ReportError::io(&report.output_path, e))?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::callgraph::NO_RELATIONS_NOTE;
    use crate::pipeline::{Stage, StageTiming};
    use crate::runner::CoverageRecord;

    fn rationale(source: &str, function: &str, edge: &[&str]) -> TestRationale {
        TestRationale {
            source_file: source.into(),
            function_name: function.into(),
            basic_cases: vec![format!("{function} returns the expected value")],
            edge_cases: edge.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn outcome(id: &str, detail: Option<&str>) -> TestRunOutcome {
        TestRunOutcome {
            test_id: id.into(),
            status: if detail.is_some() { TestStatus::Failed } else { TestStatus::Passed },
            failure_detail: detail.map(String::from),
            duration_ms: 3,
        }
    }

    fn inputs() -> (Vec<TestRationale>, Vec<TestRunOutcome>, CoverageSummary, GraphRendering, TimingLog) {
        let rationales = vec![
            rationale("lib/Book.java", "Book.getTitle", &[]),
            rationale("lib/Book.java", "Book.borrow", &["borrowing twice throws"]),
            rationale("lib/Member.java", "Member.getName", &[]),
        ];
        let outcomes =
            vec![outcome("BookTest.borrow", None), outcome("BookTest.title", Some("expected <Dune> but was <null>"))];
        let coverage = CoverageSummary::from_records(vec![
            CoverageRecord::new("a", 10, 0).unwrap(),
            CoverageRecord::new("b", 10, 5).unwrap(),
        ]);
        let graph = GraphRendering::EmbeddedDot {
            dot_text: "digraph callgraph {\n  \"Book.borrow\";\n}\n".into(),
            note: Some(NO_RELATIONS_NOTE.into()),
        };
        let timing = TimingLog {
            stages: vec![StageTiming { stage: Stage::EntityRetrieval, start_us: 0, end_us: 1500 }],
            total_us: 2000,
        };
        (rationales, outcomes, coverage, graph, timing)
    }

    fn compose(dir: &Path) -> TestReport {
        let (r, o, c, g, t) = inputs();
        compose_report("run-1", &r, &o, &c, &g, &t, dir).unwrap()
    }

    #[test]
    fn model_groups_and_colors() {
        let dir = tempfile::tempdir().unwrap();
        let report = compose(dir.path());
        assert_eq!(report.rationale_section.len(), 2);
        assert_eq!(report.rationale_section[0].entries[0].function_name, "Book.borrow");
        let failed = &report.results_section.rows[1];
        assert_eq!(failed.color, FAILED_RGB);
        assert_eq!(failed.detail.as_deref(), Some("expected <Dune> but was <null>"));
        assert_eq!(report.results_section.rows[0].color, PASSED_RGB);
        assert_eq!(report.results_section.passed + report.results_section.failed, 2);
        let total = &report.coverage_section.overall;
        assert_eq!((total.statements, total.missed, total.percent), (20, 5, 75.0));
    }

    #[test]
    fn document_text_has_sections_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let report = compose(dir.path());
        let text = extract_text(&report.output_path).unwrap();
        let mut last = 0;
        for title in SECTION_TITLES {
            let at = text[last..].find(title).unwrap_or_else(|| panic!("{title} missing or out of order in\n{text}"));
            last += at + title.len();
        }
        assert!(text.contains("Edge cases: Not applicable"));
        assert!(text.contains("Edge cases: borrowing twice throws"));
        assert!(text.contains("FAILED  BookTest.title"));
        assert!(text.contains("expected <Dune> but was <null>"));
        assert!(text.contains("TOTAL"));
        assert!(text.contains(NO_RELATIONS_NOTE));
        assert_eq!(text.matches("BookTest.title").count(), 1);
    }

    #[test]
    fn composing_twice_gives_identical_text() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ta = extract_text(&compose(a.path()).output_path).unwrap();
        let tb = extract_text(&compose(b.path()).output_path).unwrap();
        assert_eq!(ta, tb);
    }

    #[test]
    fn long_reports_paginate() {
        let dir = tempfile::tempdir().unwrap();
        let (r, _, c, g, t) = inputs();
        let outcomes: Vec<_> = (0..200).map(|i| outcome(&format!("t.case_{i:03}"), None)).collect();
        let report = compose_report("run-2", &r, &outcomes, &c, &g, &t, dir.path()).unwrap();
        let text = extract_text(&report.output_path).unwrap();
        for i in [0, 99, 199] {
            assert!(text.contains(&format!("t.case_{i:03}")));
        }
    }

    #[test]
    fn unwritable_output_is_a_report_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let (r, o, c, g, t) = inputs();
        let err = compose_report("run-3", &r, &o, &c, &g, &t, &blocker.join("sub")).unwrap_err();
        assert!(matches!(err, ReportError::Io { .. }));
    }
}
