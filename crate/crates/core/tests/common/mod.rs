#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use testpilot_core::config::{load_config_with_env, ConfigLayer, ServiceConfig};
use testpilot_core::runner::AdapterConfig;
use testpilot_core::TargetLanguage;

pub const EXPERIMENT_PROMPT: &str = "Generate unit tests for the experiment project written in Python";
pub const CINEMA_PROMPT: &str = "Write Python-based tests for the cinema project, specifically for the models folder.";
pub const LIBRARY_PROMPT: &str =
    "Please create unit tests for the project Library under the folder management, written in Java";

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
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

/// Private copy of the sample workspace and canned artifacts under `dir`,
/// with the bundled hermetic configuration pointed at it.
pub struct Hermetic {
    pub dir: PathBuf,
    pub config: ServiceConfig,
}

impl Hermetic {
    pub fn new(dir: &Path) -> Self {
        let samples = repo_root().join("samples");
        copy_tree(&samples.join("workspace"), &dir.join("workspace"));
        copy_tree(&samples.join("artifacts"), &dir.join("artifacts"));
        let config = Self::load(dir, ConfigLayer::default());
        Hermetic { dir: dir.to_path_buf(), config }
    }

    fn load(dir: &Path, extra: ConfigLayer) -> ServiceConfig {
        let stub = AdapterConfig::Stub { artifacts_dir: dir.join("artifacts"), delay_ms: 0 };
        let mut layer = ConfigLayer {
            workspace_roots: Some(vec![dir.join("workspace")]),
            output_dir: Some(dir.join("out")),
            run_log: Some(dir.join("out/runs.jsonl")),
            runners: [(TargetLanguage::Python, stub.clone()), (TargetLanguage::Java, stub)].into(),
            ..ConfigLayer::default()
        };
        if extra.fixture_path.is_some() {
            layer.fixture_path = extra.fixture_path;
        }
        if extra.lock_timeout_s.is_some() {
            layer.lock_timeout_s = extra.lock_timeout_s;
        }
        layer.runners.extend(extra.runners);
        load_config_with_env(Some(&repo_root().join("samples/testpilot.toml")), |_| None, layer).unwrap()
    }

    pub fn with(mut self, extra: ConfigLayer) -> Self {
        self.config = Self::load(&self.dir, extra);
        self
    }

    pub fn artifacts(&self, project: &str) -> PathBuf {
        self.dir.join("artifacts").join(project)
    }

    /// Makes the canned runner report a compilation failure for `project`.
    pub fn inject_compile_failure(&self, project: &str) {
        fs::write(
            self.artifacts(project).join("compile_error.log"),
            "[ERROR] COMPILATION ERROR :\n[ERROR] BookTest.java:[12,9] cannot find symbol\n  symbol:   method getTitel()\n",
        )
        .unwrap();
    }

    pub fn with_runner_delay(self, delay_ms: u64) -> Self {
        let stub = AdapterConfig::Stub { artifacts_dir: self.dir.join("artifacts"), delay_ms };
        self.with(ConfigLayer {
            runners: [(TargetLanguage::Python, stub.clone()), (TargetLanguage::Java, stub)].into(),
            ..ConfigLayer::default()
        })
    }
}
