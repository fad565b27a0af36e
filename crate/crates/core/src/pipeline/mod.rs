//! End-to-end run: entity retrieval, project location, test generation, call
//! graph, writing tests, execution and the report. Every stage is timed and
//! every invocation yields a [`RunRecord`], whatever fails.

mod lock;
mod metrics;
mod runlog;
mod timing;

use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use chrono::{DateTime, Utc};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lock::{LockTimeout, ProjectLockGuard, ProjectLocks};
pub use metrics::{aggregate_metrics, round2, GroupBy, MetricsRow, MetricsTable};
pub use runlog::{RunLog, RunLogError};
pub use timing::{Stage, StageClock, StageTiming, TimingLog};

use crate::callgraph::{generate_callgraph, render_graph};
use crate::entity::{extract_entities, EntityError, ExtractedEntities};
use crate::gateway::{GatewayError, LlmGateway};
use crate::language::TargetLanguage;
use crate::report::{compose_report, write_manifest, ReportError, RunManifest};
use crate::runner::{execute_tests, parse_coverage, AdapterRegistry, RunnerError};
use crate::synth::{generate_tests, write_test_files, SynthError, DEFAULT_PROMPT_BUDGET_BYTES};
use crate::workspace::{collect_sources, locate_project, LocateError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Success,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureCategory {
    AmbiguousPrompt,
    ProjectNotFound,
    GenerationParseFailure,
    CompilationError,
    ExecutionEnvironment,
    ProviderError,
    ReportError,
}

impl FailureCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureCategory::AmbiguousPrompt => "ambiguous_prompt",
            FailureCategory::ProjectNotFound => "project_not_found",
            FailureCategory::GenerationParseFailure => "generation_parse_failure",
            FailureCategory::CompilationError => "compilation_error",
            FailureCategory::ExecutionEnvironment => "execution_environment",
            FailureCategory::ProviderError => "provider_error",
            FailureCategory::ReportError => "report_error",
        }
    }
}

impl fmt::Display for FailureCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Any error a stage can raise.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Entity(#[from] EntityError),
    #[error(transparent)]
    Locate(#[from] LocateError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Runner(#[from] RunnerError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("project {} is locked by another run; gave up after {:?}", .0.root.display(), .0.waited)]
    LockTimeout(LockTimeout),
    #[error("no test runner configured for {0}")]
    NoAdapter(TargetLanguage),
    #[error("the test run produced no test outcomes")]
    NoOutcomes,
    #[error("internal error: {0}")]
    Internal(String),
}

/// Maps a stage error to its category. Combinations not listed fall back to
/// `execution_environment`; the caller keeps the error message.
pub fn classify_failure(stage: Stage, error: &PipelineError) -> FailureCategory {
    use FailureCategory as C;
    use PipelineError as E;
    match (stage, error) {
        (Stage::EntityRetrieval, E::Entity(_)) => C::AmbiguousPrompt,
        (Stage::FolderLocation, E::Locate(_)) => C::ProjectNotFound,
        (Stage::TestGeneration, E::Synth(SynthError::Gateway(_))) => C::ProviderError,
        (Stage::TestGeneration, E::Synth(SynthError::GenerationParseFailure(_))) => C::GenerationParseFailure,
        (Stage::TestExecution, E::Runner(RunnerError::CompilationError(_))) => C::CompilationError,
        (Stage::PdfReport, E::Report(_)) => C::ReportError,
        _ => C::ExecutionEnvironment,
    }
}

/// Outcome of one pipeline invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub prompt: String,
    pub started_at: DateTime<Utc>,
    pub entities: Option<ExtractedEntities>,
    /// Project directory name as found on disk.
    pub project: Option<String>,
    pub language: Option<TargetLanguage>,
    /// Lines in the collected sources.
    pub loc: Option<usize>,
    pub status: RunStatus,
    pub failure_category: Option<FailureCategory>,
    pub failure_stage: Option<Stage>,
    pub failure_message: Option<String>,
    #[serde(default)]
    pub lock_timeout: bool,
    pub timing: TimingLog,
    pub coverage_overall: Option<f64>,
    #[serde(default)]
    pub passed: usize,
    #[serde(default)]
    pub failed: usize,
    pub report_path: Option<PathBuf>,
    pub run_dir: Option<PathBuf>,
}

impl RunRecord {
    pub fn is_success(&self) -> bool {
        self.status == RunStatus::Success
    }

    pub fn check_invariants(&self) -> Result<(), String> {
        let success = self.status == RunStatus::Success;
        if success != (self.failure_category.is_none() && self.report_path.is_some()) {
            return Err("status must be success exactly when there is a report and no failure".into());
        }
        if success && !self.timing.is_complete() {
            return Err("successful run with missing stages".into());
        }
        self.timing.check_invariants()
    }

    pub fn manifest(&self) -> RunManifest {
        RunManifest {
            run_id: self.run_id.clone(),
            status: self.status,
            failure_category: self.failure_category,
            failure_message: self.failure_message.clone(),
            project: self.project.clone(),
            language: self.language,
            coverage_overall: self.coverage_overall,
            passed: self.passed,
            failed: self.failed,
            report_path: self.report_path.clone(),
            stage_timings_ms: crate::report::manifest_timings(&self.timing),
            total_ms: self.timing.total_ms(),
        }
    }
}

/// Sortable, collision-resistant run id: UTC timestamp plus a random suffix.
pub fn new_run_id() -> String {
    let suffix: u32 = rand::thread_rng().gen_range(0..0x100_0000);
    format!("{}-{suffix:06x}", Utc::now().format("%Y%m%dT%H%M%S%.3fZ"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub workspace_roots: Vec<PathBuf>,
    pub output_dir: PathBuf,
    pub prompt_budget_bytes: usize,
    pub lock_timeout: Duration,
    /// DOT renderer program; without it the graph is embedded as text.
    pub dot_renderer: String,
    pub run_log: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn new(workspace_roots: Vec<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            workspace_roots,
            output_dir: output_dir.into(),
            prompt_budget_bytes: DEFAULT_PROMPT_BUDGET_BYTES,
            lock_timeout: Duration::from_secs(600),
            dot_renderer: "dot".into(),
            run_log: None,
        }
    }
}

/// Shared state for many runs: configuration, gateway, runners and locks.
#[derive(Debug, Clone)]
pub struct Pipeline {
    config: PipelineConfig,
    gateway: Arc<LlmGateway>,
    adapters: AdapterRegistry,
    locks: Arc<ProjectLocks>,
    run_log: Option<Arc<RunLog>>,
}

impl Pipeline {
    pub fn new(config: PipelineConfig, gateway: Arc<LlmGateway>, adapters: AdapterRegistry) -> Self {
        let run_log = config.run_log.as_ref().map(|p| Arc::new(RunLog::new(p)));
        Self { config, gateway, adapters, locks: ProjectLocks::global(), run_log }
    }

    pub fn with_locks(mut self, locks: Arc<ProjectLocks>) -> Self {
        self.locks = locks;
        self
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn gateway(&self) -> &LlmGateway {
        &self.gateway
    }

    pub fn run_log(&self) -> Option<&RunLog> {
        self.run_log.as_deref()
    }

    /// Runs the pipeline, writes the run manifest and appends to the run log.
    pub fn run(&self, prompt: &str) -> RunRecord {
        let record = execute(prompt, &self.config, &self.gateway, &self.adapters, &self.locks);
        if let Some(dir) = &record.run_dir {
            if let Err(err) = write_manifest(dir, &record.manifest()) {
                tracing::warn!("cannot write manifest for {}: {err}", record.run_id);
            }
        }
        if let Some(log) = &self.run_log {
            if let Err(err) = log.append(&record) {
                tracing::warn!("cannot append {} to run log: {err}", record.run_id);
            }
        }
        record
    }
}

/// One run with the process-wide lock registry. Writes the manifest but not
/// the run log; use [`Pipeline`] for that.
pub fn run_pipeline(
    prompt: &str,
    config: &PipelineConfig,
    gateway: &LlmGateway,
    adapters: &AdapterRegistry,
) -> RunRecord {
    let record = execute(prompt, config, gateway, adapters, &ProjectLocks::global());
    if let Some(dir) = &record.run_dir {
        if let Err(err) = write_manifest(dir, &record.manifest()) {
            tracing::warn!("cannot write manifest for {}: {err}", record.run_id);
        }
    }
    record
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    payload
        .downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| payload.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "stage panicked".into())
}

struct Run {
    clock: StageClock,
    record: RunRecord,
}

impl Run {
    /// Times `f` as `stage`; panics become internal errors.
    fn stage<T>(
        &mut self,
        stage: Stage,
        f: impl FnOnce() -> Result<T, PipelineError>,
    ) -> Result<T, (Stage, PipelineError)> {
        self.clock
            .time(stage, || {
                catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| Err(PipelineError::Internal(panic_message(p))))
            })
            .map_err(|e| (stage, e))
    }
}

fn execute(
    prompt: &str,
    config: &PipelineConfig,
    gateway: &LlmGateway,
    adapters: &AdapterRegistry,
    locks: &ProjectLocks,
) -> RunRecord {
    let run_id = new_run_id();
    let mut run = Run {
        clock: StageClock::start(),
        record: RunRecord {
            run_id: run_id.clone(),
            prompt: prompt.to_string(),
            started_at: Utc::now(),
            entities: None,
            project: None,
            language: None,
            loc: None,
            status: RunStatus::Failed,
            failure_category: None,
            failure_stage: None,
            failure_message: None,
            lock_timeout: false,
            timing: TimingLog::default(),
            coverage_overall: None,
            passed: 0,
            failed: 0,
            report_path: None,
            run_dir: None,
        },
    };
    let run_dir = config.output_dir.join(&run_id);
    match std::fs::create_dir_all(&run_dir) {
        Ok(()) => run.record.run_dir = Some(run_dir.clone()),
        Err(err) => {
            let mut record = run.record;
            record.failure_category = Some(FailureCategory::ExecutionEnvironment);
            record.failure_message = Some(format!("cannot create run directory {}: {err}", run_dir.display()));
            record.timing = run.clock.finish();
            return record;
        }
    }
    let outcome = stages(&mut run, prompt, config, gateway, adapters, locks, &run_dir);
    let mut record = run.record;
    match outcome {
        Ok(report_path) => {
            record.status = RunStatus::Success;
            record.report_path = Some(report_path);
        }
        Err((stage, err)) => {
            record.failure_category = Some(classify_failure(stage, &err));
            record.failure_stage = Some(stage);
            record.lock_timeout = matches!(err, PipelineError::LockTimeout(_));
            record.failure_message = Some(err.to_string());
            tracing::info!(run_id = %record.run_id, %stage, "run failed: {err}");
        }
    }
    record.timing = run.clock.finish();
    record
}

fn stages(
    run: &mut Run,
    prompt: &str,
    config: &PipelineConfig,
    gateway: &LlmGateway,
    adapters: &AdapterRegistry,
    locks: &ProjectLocks,
    run_dir: &Path,
) -> Result<PathBuf, (Stage, PipelineError)> {
    let entities = run.stage(Stage::EntityRetrieval, || Ok(extract_entities(prompt, gateway)?))?;
    run.record.entities = Some(entities.clone());
    run.record.language = Some(entities.target_language);

    let context =
        run.stage(Stage::FolderLocation, || Ok(collect_sources(locate_project(&entities, &config.workspace_roots)?)?))?;
    run.record.project = Some(context.project_name.clone());
    run.record.loc = Some(context.total_lines());
    let language = context.target_language;

    let suite = run.stage(Stage::TestGeneration, || {
        Ok(generate_tests(&context.sources, language, gateway, config.prompt_budget_bytes)?)
    })?;

    let rendering = run.stage(Stage::DotGraph, || {
        let generated = generate_callgraph(&context.sources, language, gateway);
        tracing::debug!(origin = ?generated.origin, "call graph ready");
        Ok(render_graph(&generated.graph, run_dir, &config.dot_renderer))
    })?;

    let (guard, written) = run.stage(Stage::WriteTests, || {
        let guard = locks.acquire(&context.root_path, config.lock_timeout).map_err(PipelineError::LockTimeout)?;
        let written = write_test_files(&suite, &context)?;
        Ok((guard, written))
    })?;

    let target_dir = context.target_dir.canonicalize().unwrap_or_else(|_| context.target_dir.clone());
    let executed = run.stage(Stage::TestExecution, || {
        let adapter = adapters.get(language).ok_or(PipelineError::NoAdapter(language))?;
        let (outcomes, raw) = execute_tests(&context, &written, adapter.as_ref(), &run_dir.join("artifacts"))?;
        if outcomes.is_empty() {
            return Err(PipelineError::NoOutcomes);
        }
        let coverage = parse_coverage(&raw, language, &written, &target_dir)?;
        Ok((outcomes, coverage))
    });
    drop(guard);
    let (outcomes, coverage) = executed?;
    run.record.coverage_overall = Some(coverage.overall.percent);
    run.record.failed = outcomes.iter().filter(|o| o.status == crate::runner::TestStatus::Failed).count();
    run.record.passed = outcomes.len() - run.record.failed;

    let timing = run.clock.snapshot();
    let run_id = run.record.run_id.clone();
    let report = run.stage(Stage::PdfReport, || {
        Ok(compose_report(&run_id, &suite.rationales, &outcomes, &coverage, &rendering, &timing, run_dir)?)
    })?;
    Ok(report.output_path)
}

/// Convenience for gateway errors raised outside a stage.
impl From<GatewayError> for PipelineError {
    fn from(err: GatewayError) -> Self {
        PipelineError::Synth(SynthError::Gateway(err))
    }
}
