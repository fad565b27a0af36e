use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;

use super::CallGraph;

pub const NO_RELATIONS_NOTE: &str = "no call relations detected";
const RENDER_TIMEOUT: Duration = Duration::from_secs(30);

/// How the call graph appears in the report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphRendering {
    Image { path: PathBuf, dot_text: String },
    EmbeddedDot { dot_text: String, note: Option<String> },
}

impl GraphRendering {
    pub fn dot_text(&self) -> &str {
        match self {
            GraphRendering::Image { dot_text, .. } | GraphRendering::EmbeddedDot { dot_text, .. } => dot_text,
        }
    }
}

/// Renders `graph` to PNG with an external DOT renderer found on `PATH`
/// (`renderer` is the program name, usually `dot`). Any failure degrades to
/// an embedded DOT block; this never fails.
pub fn render_graph(graph: &CallGraph, output_dir: &Path, renderer: &str) -> GraphRendering {
    let dot_text = graph.dot_text();
    if graph.edges.is_empty() {
        return GraphRendering::EmbeddedDot { dot_text, note: Some(NO_RELATIONS_NOTE.to_string()) };
    }
    match try_render(&dot_text, output_dir, renderer) {
        Ok(path) => GraphRendering::Image { path, dot_text },
        Err(reason) => {
            tracing::info!("call graph not rendered as image: {reason}");
            GraphRendering::EmbeddedDot { dot_text, note: None }
        }
    }
}

fn try_render(dot_text: &str, output_dir: &Path, renderer: &str) -> Result<PathBuf, String> {
    let program = which::which(renderer).map_err(|e| format!("{renderer}: {e}"))?;
    fs::create_dir_all(output_dir).map_err(|e| e.to_string())?;
    let dot_path = output_dir.join("callgraph.dot");
    let png_path = output_dir.join("callgraph.png");
    fs::write(&dot_path, dot_text).map_err(|e| e.to_string())?;
    let mut child = Command::new(program)
        .arg("-Tpng")
        .arg("-o")
        .arg(&png_path)
        .arg(&dot_path)
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| e.to_string())?;
    let status = match child.wait_timeout(RENDER_TIMEOUT).map_err(|e| e.to_string())? {
        Some(status) => status,
        None => {
            let _ = child.kill();
            let _ = child.wait();
            return Err("renderer timed out".into());
        }
    };
    if !status.success() {
        return Err(format!("renderer exited with {status}"));
    }
    match fs::metadata(&png_path) {
        Ok(meta) if meta.len() > 0 => Ok(png_path),
        _ => Err("renderer produced no image".into()),
    }
}
