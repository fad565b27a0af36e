use std::collections::HashMap;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde_json::json;
use testpilot_core::config::ServiceConfig;
use testpilot_core::pipeline::{FailureCategory, Pipeline, RunRecord};
use testpilot_core::report::{RunManifest, REPORT_FILE};
use testpilot_core::RunStatus;
use tokio::sync::Mutex;

use crate::check_prompt;

#[derive(Clone)]
pub struct AppState {
    pipeline: Pipeline,
    deadline: Duration,
    /// Runs served by this process, for `/runs` when no run log is configured.
    recent: Arc<Mutex<Vec<RunRecord>>>,
}

impl AppState {
    pub fn new(pipeline: Pipeline, deadline: Duration) -> Self {
        Self { pipeline, deadline, recent: Arc::default() }
    }

    pub fn from_config(config: &ServiceConfig) -> anyhow::Result<Self> {
        Ok(Self::new(config.pipeline()?, config.request_deadline()))
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/run", get(run))
        .route("/report/{run_id}", get(report))
        .route("/runs", get(runs))
        .with_state(state)
}

pub async fn serve(config: ServiceConfig) -> anyhow::Result<()> {
    let state = AppState::from_config(&config)?;
    let listener = tokio::net::TcpListener::bind(&config.listen_address).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    eprintln!("testpilot listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

/// Status code for a finished run.
pub fn status_for(record: &RunRecord) -> StatusCode {
    match record.status {
        RunStatus::Success => StatusCode::OK,
        RunStatus::Failed if record.lock_timeout => StatusCode::SERVICE_UNAVAILABLE,
        RunStatus::Failed => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

async fn run(State(state): State<AppState>, Query(query): Query<HashMap<String, String>>) -> Response {
    let Some(prompt) = query.get("prompt") else {
        return error(StatusCode::BAD_REQUEST, "missing `prompt` query parameter");
    };
    let prompt = match check_prompt(prompt) {
        Ok(p) => p.to_string(),
        Err(m) => return error(StatusCode::BAD_REQUEST, m),
    };
    let pipeline = state.pipeline.clone();
    let job = tokio::task::spawn_blocking(move || pipeline.run(&prompt));
    let record = match tokio::time::timeout(state.deadline, job).await {
        Ok(Ok(record)) => record,
        Ok(Err(join)) => return error(StatusCode::INTERNAL_SERVER_ERROR, format!("run aborted: {join}")),
        Err(_) => {
            // the run keeps going in the background; the client gets a failure now
            let manifest = RunManifest {
                run_id: String::new(),
                status: RunStatus::Failed,
                failure_category: Some(FailureCategory::ExecutionEnvironment),
                failure_message: Some(format!("run exceeded the {}s request deadline", state.deadline.as_secs())),
                project: None,
                language: None,
                coverage_overall: None,
                passed: 0,
                failed: 0,
                report_path: None,
                stage_timings_ms: Default::default(),
                total_ms: state.deadline.as_secs_f64() * 1000.0,
            };
            return (StatusCode::UNPROCESSABLE_ENTITY, Json(manifest)).into_response();
        }
    };
    let status = status_for(&record);
    let manifest = record.manifest();
    if state.pipeline.run_log().is_none() {
        state.recent.lock().await.push(record);
    }
    (status, Json(manifest)).into_response()
}

fn valid_run_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 64
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '.' | '_'))
        && !id.starts_with('.')
}

async fn report(State(state): State<AppState>, Path(run_id): Path<String>) -> Response {
    if !valid_run_id(&run_id) {
        return error(StatusCode::NOT_FOUND, "unknown run");
    }
    let path = state.pipeline.config().output_dir.join(&run_id).join(REPORT_FILE);
    match tokio::fs::read(&path).await {
        Ok(bytes) => (
            [
                (header::CONTENT_TYPE, "application/pdf".to_string()),
                (header::CONTENT_DISPOSITION, format!("inline; filename=\"{run_id}.pdf\"")),
            ],
            Body::from(bytes),
        )
            .into_response(),
        Err(_) => error(StatusCode::NOT_FOUND, format!("no report for run `{run_id}`")),
    }
}

async fn runs(State(state): State<AppState>) -> Response {
    match state.pipeline.run_log() {
        Some(log) => {
            let log_path = log.path().to_path_buf();
            let loaded = tokio::task::spawn_blocking(move || testpilot_core::RunLog::new(log_path).load()).await;
            match loaded {
                Ok(Ok(records)) => Json(records).into_response(),
                Ok(Err(e)) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
                Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
            }
        }
        None => Json(state.recent.lock().await.clone()).into_response(),
    }
}
