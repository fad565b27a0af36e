//! Core of testpilot: turns a natural-language request into generated unit
//! tests for a Python or Java project, runs them, and writes a PDF report.
//!
//! The stages live in their own modules and are wired together by
//! [`pipeline`]. Commonly used types are re-exported at the crate root.

pub mod callgraph;
pub mod config;
pub mod entity;
pub mod gateway;
pub mod language;
pub mod pipeline;
pub mod prompts;
pub mod report;
pub mod runner;
pub mod synth;
pub mod workspace;

pub use callgraph::{parse_dot, static_callgraph, CallGraph, DotParseError, GraphRendering};
pub use config::{load_config, ConfigError, ConfigLayer, ServiceConfig};
pub use entity::{extract_entities, parse_prompt_fallback, EntityError, ExtractedEntities};
pub use gateway::{FixtureStore, GatewayError, GatewayMode, LlmGateway, Provider};
pub use language::TargetLanguage;
pub use pipeline::{
    aggregate_metrics, classify_failure, run_pipeline, FailureCategory, GroupBy, MetricsTable, Pipeline,
    PipelineConfig, RunLog, RunRecord, RunStatus, Stage, TimingLog,
};
pub use report::{compose_report, report_manifest, RunManifest, TestReport};
pub use runner::{CoverageRecord, CoverageSummary, TestRunOutcome, TestStatus};
pub use synth::{GeneratedTestSuite, TestRationale};
pub use workspace::{locate_project, ProjectContext, SourceFile};
