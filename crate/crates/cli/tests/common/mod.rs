#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use testpilot_core::config::{load_config, ConfigLayer, ServiceConfig};

pub const EXPERIMENT_PROMPT: &str = "Generate unit tests for the experiment project written in Python";
pub const LIBRARY_PROMPT: &str =
    "Please create unit tests for the project Library under the folder management, written in Java";

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

pub fn sample_config() -> PathBuf {
    repo_root().join("samples/testpilot.toml")
}

pub fn copy_tree(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for entry in fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_tree(&entry.path(), &target);
        } else {
            fs::copy(entry.path(), target).unwrap();
        }
    }
}

/// Copies the sample workspace into `dir` and returns it.
pub fn workspace_copy(dir: &Path) -> PathBuf {
    let ws = dir.join("workspace");
    copy_tree(&repo_root().join("samples/workspace"), &ws);
    ws
}

/// Bundled replay configuration aimed at a private copy of the workspace.
pub fn hermetic_config(dir: &Path, extra: ConfigLayer) -> ServiceConfig {
    let layer = ConfigLayer {
        workspace_roots: Some(vec![workspace_copy(dir)]),
        output_dir: Some(dir.join("out")),
        run_log: Some(dir.join("out/runs.jsonl")),
        ..extra
    };
    load_config(Some(&sample_config()), layer).unwrap()
}

pub fn run_cli(args: &[&str]) -> (u8, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code =
        testpilot_cli::cli::run_cli(std::iter::once("testpilot").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

/// Copies the canned runner artifacts into `dir` so a test may alter them.
pub fn artifacts_copy(dir: &Path) -> PathBuf {
    let artifacts = dir.join("artifacts");
    copy_tree(&repo_root().join("samples/artifacts"), &artifacts);
    artifacts
}
