//! Executes generated tests through per-language runner adapters and
//! normalizes their results and statement coverage.
//!
//! An adapter is a command template plus the formats of the two artifacts it
//! leaves on disk: a JUnit-style results document and a coverage report.

mod adapter;
mod coverage;
mod junit;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adapter::{AdapterConfig, AdapterRegistry, CommandAdapter, StubAdapter, WorkingDir};
pub use coverage::{coverage_percent, CoverageFormat, CoverageRecord, CoverageSummary, TOTAL_ROW};
pub use junit::parse_junit;

use crate::language::TargetLanguage;
use crate::workspace::{slash_path, ProjectContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestStatus {
    Passed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestRunOutcome {
    pub test_id: String,
    pub status: TestStatus,
    /// Present exactly when `status` is `Failed`.
    pub failure_detail: Option<String>,
    pub duration_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResultsFormat {
    Junit,
}

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("generated tests failed to compile: {0}")]
    CompilationError(String),
    #[error("test execution environment error: {0}")]
    ExecutionEnvironmentError(String),
    #[error("malformed test results: {0}")]
    ResultParseError(String),
    #[error("malformed coverage report: {0}")]
    CoverageParseError(String),
    #[error("invalid runner invocation: {0}")]
    Precondition(String),
}

/// What an adapter leaves behind after running.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawArtifacts {
    /// A results file, or a directory of `*.xml` result files.
    pub results_path: PathBuf,
    pub results_format: ResultsFormat,
    pub coverage_path: PathBuf,
    pub coverage_format: CoverageFormat,
    pub exit_code: Option<i32>,
    pub stdout: String,
    pub stderr: String,
    pub duration_ms: u64,
}

/// Inputs handed to an adapter.
#[derive(Debug, Clone, Copy)]
pub struct RunRequest<'a> {
    pub context: &'a ProjectContext,
    pub tests: &'a [PathBuf],
    pub artifacts_dir: &'a Path,
}

pub trait RunnerAdapter: Send + Sync {
    fn name(&self) -> &str;
    fn language(&self) -> TargetLanguage;
    fn run(&self, request: RunRequest<'_>) -> Result<RawArtifacts, RunnerError>;
}

/// Runs `written_tests` through `adapter` and parses the per-test outcomes.
/// Coverage is parsed separately with [`parse_coverage`].
pub fn execute_tests(
    context: &ProjectContext,
    written_tests: &[PathBuf],
    adapter: &dyn RunnerAdapter,
    artifacts_dir: &Path,
) -> Result<(Vec<TestRunOutcome>, RawArtifacts), RunnerError> {
    if written_tests.is_empty() {
        return Err(RunnerError::Precondition("no test files to execute".into()));
    }
    if adapter.language() != context.target_language {
        return Err(RunnerError::Precondition(format!(
            "adapter `{}` runs {} tests but the project is {}",
            adapter.name(),
            adapter.language(),
            context.target_language
        )));
    }
    fs::create_dir_all(artifacts_dir).map_err(|e| RunnerError::ExecutionEnvironmentError(e.to_string()))?;
    let started = Instant::now();
    let mut raw = adapter.run(RunRequest { context, tests: written_tests, artifacts_dir })?;
    if raw.duration_ms == 0 {
        raw.duration_ms = started.elapsed().as_millis() as u64;
    }
    let outcomes = parse_runner_output(&raw, context.target_language)?;
    Ok((outcomes, raw))
}

fn read_artifact(path: &Path, what: &str) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("cannot read {what} {}: {e}", path.display()))
}

/// Normalized outcomes, sorted by `test_id`.
pub fn parse_runner_output(raw: &RawArtifacts, _language: TargetLanguage) -> Result<Vec<TestRunOutcome>, RunnerError> {
    let files: Vec<PathBuf> = if raw.results_path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(&raw.results_path)
            .map_err(|e| RunnerError::ResultParseError(e.to_string()))?
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("xml"))
            .collect();
        files.sort();
        files
    } else {
        vec![raw.results_path.clone()]
    };
    let mut outcomes = Vec::new();
    for file in files {
        let text = read_artifact(&file, "results").map_err(RunnerError::ResultParseError)?;
        match raw.results_format {
            ResultsFormat::Junit => outcomes.extend(parse_junit(&text)?),
        }
    }
    outcomes.sort_by(|a, b| a.test_id.cmp(&b.test_id));
    Ok(outcomes)
}

/// Per-file statement coverage with a summed TOTAL row. Rows for the
/// generated test files (given relative to the target directory or absolute)
/// and for any test-named file are excluded.
pub fn parse_coverage(
    raw: &RawArtifacts,
    language: TargetLanguage,
    generated_tests: &[PathBuf],
    target_dir: &Path,
) -> Result<CoverageSummary, RunnerError> {
    let text = read_artifact(&raw.coverage_path, "coverage report").map_err(RunnerError::CoverageParseError)?;
    let records = match raw.coverage_format {
        CoverageFormat::CoveragePyJson => coverage::parse_coveragepy_json(&text)?,
        CoverageFormat::JacocoXml => coverage::parse_jacoco_xml(&text)?,
    };
    let excluded: Vec<String> =
        generated_tests.iter().map(|p| slash_path(p.strip_prefix(target_dir).unwrap_or(p))).collect();
    let kept = records
        .into_iter()
        .filter(|r| !coverage::is_test_row(&r.file, &excluded, |n| language.is_test_file_name(n)))
        .collect();
    let summary = CoverageSummary::from_records(kept);
    summary.check_invariants().map_err(RunnerError::CoverageParseError)?;
    Ok(summary)
}
