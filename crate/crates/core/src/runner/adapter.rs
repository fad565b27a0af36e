use std::collections::HashMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;

use super::{CoverageFormat, RawArtifacts, ResultsFormat, RunRequest, RunnerAdapter, RunnerError};
use crate::language::TargetLanguage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkingDir {
    ProjectRoot,
    TargetDir,
}

/// Runs an external test command built from a template.
///
/// Placeholders: `{project_dir}`, `{target_dir}`, `{artifacts_dir}`,
/// `{results}`, `{coverage}`, and `{tests}`. An argument that is exactly
/// `{tests}` expands to one argument per test file; elsewhere `{tests}` is
/// replaced by the space-joined list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandAdapter {
    pub language: TargetLanguage,
    pub program: String,
    pub args: Vec<String>,
    pub working_dir: WorkingDir,
    pub results_path: String,
    pub results_format: ResultsFormat,
    pub coverage_path: String,
    pub coverage_format: CoverageFormat,
    pub timeout_s: u64,
    /// Substrings of the runner output that mean the tests did not compile.
    #[serde(default)]
    pub compile_error_markers: Vec<String>,
}

impl CommandAdapter {
    /// pytest with its JUnit report and pytest-cov JSON coverage.
    pub fn pytest() -> Self {
        Self {
            language: TargetLanguage::Python,
            program: "python3".into(),
            args: [
                "-m",
                "pytest",
                "-q",
                "{tests}",
                "--junitxml={results}",
                "--cov={target_dir}",
                "--cov-report=json:{coverage}",
            ]
            .map(String::from)
            .to_vec(),
            working_dir: WorkingDir::TargetDir,
            results_path: "{artifacts_dir}/results.xml".into(),
            results_format: ResultsFormat::Junit,
            coverage_path: "{artifacts_dir}/coverage.json".into(),
            coverage_format: CoverageFormat::CoveragePyJson,
            timeout_s: 300,
            compile_error_markers: Vec::new(),
        }
    }

    /// Maven Surefire with the JaCoCo agent; expects the plugin in the POM.
    pub fn maven() -> Self {
        Self {
            language: TargetLanguage::Java,
            program: "mvn".into(),
            args: ["-B", "-q", "test", "jacoco:report"].map(String::from).to_vec(),
            working_dir: WorkingDir::ProjectRoot,
            results_path: "{project_dir}/target/surefire-reports".into(),
            results_format: ResultsFormat::Junit,
            coverage_path: "{project_dir}/target/site/jacoco/jacoco.xml".into(),
            coverage_format: CoverageFormat::JacocoXml,
            timeout_s: 600,
            compile_error_markers: ["COMPILATION ERROR", "Compilation failure", "cannot find symbol"]
                .map(String::from)
                .to_vec(),
        }
    }

    fn substitute(&self, template: &str, vars: &[(&str, String)]) -> String {
        vars.iter().fold(template.to_string(), |acc, (k, v)| acc.replace(&format!("{{{k}}}"), v))
    }
}

fn tail(text: &str, max_chars: usize) -> String {
    let count = text.chars().count();
    text.chars().skip(count.saturating_sub(max_chars)).collect()
}

fn drain<R: Read + Send + 'static>(reader: Option<R>) -> thread::JoinHandle<String> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        if let Some(mut r) = reader {
            let _ = r.read_to_end(&mut buf);
        }
        String::from_utf8_lossy(&buf).into_owned()
    })
}

impl RunnerAdapter for CommandAdapter {
    fn name(&self) -> &str {
        &self.program
    }

    fn language(&self) -> TargetLanguage {
        self.language
    }

    fn run(&self, request: RunRequest<'_>) -> Result<RawArtifacts, RunnerError> {
        let env_err = RunnerError::ExecutionEnvironmentError;
        let program = which::which(&self.program)
            .map_err(|_| env_err(format!("test runner `{}` not found on PATH", self.program)))?;
        let ctx = request.context;
        let mut vars = vec![
            ("project_dir", ctx.root_path.display().to_string()),
            ("target_dir", ctx.target_dir.display().to_string()),
            ("artifacts_dir", request.artifacts_dir.display().to_string()),
        ];
        let results = self.substitute(&self.results_path, &vars);
        let coverage = self.substitute(&self.coverage_path, &vars);
        vars.push(("results", results.clone()));
        vars.push(("coverage", coverage.clone()));
        let tests: Vec<String> = request.tests.iter().map(|t| t.display().to_string()).collect();
        let mut args = Vec::new();
        for arg in &self.args {
            if arg == "{tests}" {
                args.extend(tests.iter().cloned());
            } else {
                let mut all = vars.clone();
                all.push(("tests", tests.join(" ")));
                args.push(self.substitute(arg, &all));
            }
        }
        let cwd = match self.working_dir {
            WorkingDir::ProjectRoot => &ctx.root_path,
            WorkingDir::TargetDir => &ctx.target_dir,
        };
        let started = Instant::now();
        let mut child = Command::new(program)
            .args(&args)
            .current_dir(cwd)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| env_err(format!("cannot start `{}`: {e}", self.program)))?;
        let out = drain(child.stdout.take());
        let err = drain(child.stderr.take());
        let timeout = Duration::from_secs(self.timeout_s.max(1));
        let status = match child.wait_timeout(timeout).map_err(|e| env_err(e.to_string()))? {
            Some(status) => status,
            None => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(env_err(format!("`{}` timed out after {}s", self.program, timeout.as_secs())));
            }
        };
        let stdout = out.join().unwrap_or_default();
        let stderr = err.join().unwrap_or_default();
        let duration_ms = started.elapsed().as_millis() as u64;
        if !status.success() {
            let combined = format!("{stdout}\n{stderr}");
            if self.compile_error_markers.iter().any(|m| combined.contains(m.as_str())) {
                return Err(RunnerError::CompilationError(tail(&combined, 2000)));
            }
        }
        let results_path = PathBuf::from(&results);
        if !results_path.exists() {
            return Err(env_err(format!(
                "`{}` exited with {status} without writing results to {results}: {}",
                self.program,
                tail(&stderr, 800)
            )));
        }
        Ok(RawArtifacts {
            results_path,
            results_format: self.results_format,
            coverage_path: PathBuf::from(coverage),
            coverage_format: self.coverage_format,
            exit_code: status.code(),
            stdout,
            stderr,
            duration_ms,
        })
    }
}

/// Hermetic adapter that serves canned artifacts from
/// `<artifacts_root>/<project name, lowercased>/`:
///
/// * `results.xml`: JUnit results
/// * `coverage.json` (Python) or `jacoco.xml` (Java)
/// * `compile_error.log`: when present, the run fails to compile with its content
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StubAdapter {
    pub language: TargetLanguage,
    pub artifacts_root: PathBuf,
    pub delay: Duration,
}

impl StubAdapter {
    pub fn new(language: TargetLanguage, artifacts_root: impl Into<PathBuf>) -> Self {
        Self { language, artifacts_root: artifacts_root.into(), delay: Duration::ZERO }
    }

    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = delay;
        self
    }

    fn coverage_file(&self) -> (&'static str, CoverageFormat) {
        match self.language {
            TargetLanguage::Python => ("coverage.json", CoverageFormat::CoveragePyJson),
            TargetLanguage::Java => ("jacoco.xml", CoverageFormat::JacocoXml),
        }
    }
}

impl RunnerAdapter for StubAdapter {
    fn name(&self) -> &str {
        "stub"
    }

    fn language(&self) -> TargetLanguage {
        self.language
    }

    fn run(&self, request: RunRequest<'_>) -> Result<RawArtifacts, RunnerError> {
        let env_err = RunnerError::ExecutionEnvironmentError;
        let started = Instant::now();
        if !self.delay.is_zero() {
            thread::sleep(self.delay);
        }
        let canned = self.artifacts_root.join(request.context.project_name.to_lowercase());
        if !canned.is_dir() {
            return Err(env_err(format!("no canned artifacts at {}", canned.display())));
        }
        let compile_log = canned.join("compile_error.log");
        if compile_log.exists() {
            let log = fs::read_to_string(&compile_log).unwrap_or_default();
            return Err(RunnerError::CompilationError(log.trim().to_string()));
        }
        let (coverage_name, coverage_format) = self.coverage_file();
        let copy = |name: &str| -> Result<PathBuf, RunnerError> {
            let to = request.artifacts_dir.join(name);
            fs::copy(canned.join(name), &to).map_err(|e| env_err(format!("canned artifact {name}: {e}")))?;
            Ok(to)
        };
        let results_path = copy("results.xml")?;
        let coverage_path = copy(coverage_name)?;
        Ok(RawArtifacts {
            results_path,
            results_format: ResultsFormat::Junit,
            coverage_path,
            coverage_format,
            exit_code: Some(0),
            stdout: String::new(),
            stderr: String::new(),
            duration_ms: started.elapsed().as_millis() as u64,
        })
    }
}

/// Serializable adapter choice used in configuration files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdapterConfig {
    Command(CommandAdapter),
    Stub {
        artifacts_dir: PathBuf,
        #[serde(default)]
        delay_ms: u64,
    },
}

impl AdapterConfig {
    pub fn default_for(language: TargetLanguage) -> Self {
        match language {
            TargetLanguage::Python => AdapterConfig::Command(CommandAdapter::pytest()),
            TargetLanguage::Java => AdapterConfig::Command(CommandAdapter::maven()),
        }
    }

    /// Resolves relative paths against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        if let AdapterConfig::Stub { artifacts_dir, .. } = self {
            if artifacts_dir.is_relative() {
                *artifacts_dir = base.join(&*artifacts_dir);
            }
        }
    }

    pub fn build(&self, language: TargetLanguage, runner_timeout_s: Option<u64>) -> Arc<dyn RunnerAdapter> {
        match self {
            AdapterConfig::Command(cmd) => {
                let mut cmd = cmd.clone();
                cmd.language = language;
                if let Some(t) = runner_timeout_s {
                    cmd.timeout_s = t;
                }
                Arc::new(cmd)
            }
            AdapterConfig::Stub { artifacts_dir, delay_ms } => {
                Arc::new(StubAdapter::new(language, artifacts_dir.clone()).with_delay(Duration::from_millis(*delay_ms)))
            }
        }
    }
}

/// Language to adapter lookup.
#[derive(Clone, Default)]
pub struct AdapterRegistry {
    adapters: HashMap<TargetLanguage, Arc<dyn RunnerAdapter>>,
}

impl std::fmt::Debug for AdapterRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let names: Vec<_> = self.adapters.iter().map(|(l, a)| format!("{l}={}", a.name())).collect();
        f.debug_tuple("AdapterRegistry").field(&names).finish()
    }
}

impl AdapterRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, adapter: Arc<dyn RunnerAdapter>) -> Self {
        self.adapters.insert(adapter.language(), adapter);
        self
    }

    pub fn insert(&mut self, adapter: Arc<dyn RunnerAdapter>) {
        self.adapters.insert(adapter.language(), adapter);
    }

    pub fn get(&self, language: TargetLanguage) -> Option<Arc<dyn RunnerAdapter>> {
        self.adapters.get(&language).cloned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runner::{execute_tests, parse_coverage, TestStatus};
    use crate::workspace::ProjectContext;

    fn context(root: &Path, name: &str, language: TargetLanguage) -> ProjectContext {
        ProjectContext {
            project_name: name.into(),
            root_path: root.to_path_buf(),
            target_dir: root.to_path_buf(),
            target_language: language,
            sources: vec![],
        }
    }

    fn canned(root: &Path, project: &str, results: &str, coverage: &str) {
        let dir = root.join(project);
        fs::create_dir_all(&dir).unwrap();
        fs::write(dir.join("results.xml"), results).unwrap();
        fs::write(dir.join("coverage.json"), coverage).unwrap();
    }

    const RESULTS: &str = r#"<testsuite>
<testcase classname="t" name="a"/><testcase classname="t" name="b"/>
<testcase classname="t" name="c"/><testcase classname="t" name="d"><failure message="assert 1 == 2"/></testcase>
</testsuite>"#;

    #[test]
    fn stub_passes_canned_results_through() {
        let canned_root = tempfile::tempdir().unwrap();
        let project = tempfile::tempdir().unwrap();
        let artifacts = tempfile::tempdir().unwrap();
        canned(
            canned_root.path(),
            "demo",
            RESULTS,
            r#"{"files": {"m.py": {"summary": {"num_statements": 10, "missing_lines": 1}},
                          "test_m.py": {"summary": {"num_statements": 5, "missing_lines": 0}}}}"#,
        );
        let ctx = context(project.path(), "Demo", TargetLanguage::Python);
        let adapter = StubAdapter::new(TargetLanguage::Python, canned_root.path());
        let tests = vec![project.path().join("test_m.py")];
        let (outcomes, raw) = execute_tests(&ctx, &tests, &adapter, artifacts.path()).unwrap();
        assert_eq!(outcomes.len(), 4);
        let failed: Vec<_> = outcomes.iter().filter(|o| o.status == TestStatus::Failed).collect();
        assert_eq!(failed.len(), 1);
        assert_eq!(failed[0].failure_detail.as_deref(), Some("assert 1 == 2"));
        let cov = parse_coverage(&raw, TargetLanguage::Python, &tests, project.path()).unwrap();
        assert_eq!(cov.records.len(), 1);
        assert_eq!(cov.overall.percent, 90.0);
    }

    #[test]
    fn stub_compile_failure() {
        let canned_root = tempfile::tempdir().unwrap();
        let project = tempfile::tempdir().unwrap();
        canned(canned_root.path(), "lib", RESULTS, "{}");
        fs::write(canned_root.path().join("lib/compile_error.log"), "BookTest.java:3: error: cannot find symbol\n")
            .unwrap();
        let ctx = context(project.path(), "Lib", TargetLanguage::Java);
        let adapter = StubAdapter::new(TargetLanguage::Java, canned_root.path());
        let err = execute_tests(&ctx, &[project.path().join("BookTest.java")], &adapter, project.path()).unwrap_err();
        assert!(matches!(err, RunnerError::CompilationError(m) if m.contains("cannot find symbol")));
    }

    #[test]
    fn missing_runner_binary_is_an_environment_error() {
        let project = tempfile::tempdir().unwrap();
        let mut adapter = CommandAdapter::pytest();
        adapter.program = "testpilot-definitely-missing-runner".into();
        let ctx = context(project.path(), "p", TargetLanguage::Python);
        let err = execute_tests(&ctx, &[project.path().join("test_x.py")], &adapter, project.path()).unwrap_err();
        match err {
            RunnerError::ExecutionEnvironmentError(m) => assert!(m.contains("testpilot-definitely-missing-runner")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn preconditions() {
        let project = tempfile::tempdir().unwrap();
        let ctx = context(project.path(), "p", TargetLanguage::Python);
        let java = StubAdapter::new(TargetLanguage::Java, project.path());
        assert!(matches!(execute_tests(&ctx, &[], &java, project.path()), Err(RunnerError::Precondition(_))));
        assert!(matches!(
            execute_tests(&ctx, &[project.path().join("test_a.py")], &java, project.path()),
            Err(RunnerError::Precondition(_))
        ));
    }

    #[cfg(unix)]
    #[test]
    fn command_adapter_substitutes_and_reads_artifacts() {
        use std::os::unix::fs::PermissionsExt;
        let project = tempfile::tempdir().unwrap();
        let artifacts = tempfile::tempdir().unwrap();
        let script = project.path().join("fake-runner.sh");
        fs::write(
            &script,
            "#!/bin/sh\n# args: results coverage tests...\nres=$1; cov=$2; shift 2\n\
             echo \"<testsuite><testcase classname=\\\"x\\\" name=\\\"n$#\\\"/></testsuite>\" > \"$res\"\n\
             echo '{\"files\": {}}' > \"$cov\"\nexit 1\n",
        )
        .unwrap();
        fs::set_permissions(&script, fs::Permissions::from_mode(0o755)).unwrap();
        let adapter = CommandAdapter {
            language: TargetLanguage::Python,
            program: script.display().to_string(),
            args: vec!["{results}".into(), "{coverage}".into(), "{tests}".into()],
            working_dir: WorkingDir::TargetDir,
            results_path: "{artifacts_dir}/r.xml".into(),
            results_format: ResultsFormat::Junit,
            coverage_path: "{artifacts_dir}/c.json".into(),
            coverage_format: CoverageFormat::CoveragePyJson,
            timeout_s: 10,
            compile_error_markers: vec!["COMPILATION ERROR".into()],
        };
        let ctx = context(project.path(), "p", TargetLanguage::Python);
        let tests = vec![project.path().join("test_a.py"), project.path().join("test_b.py")];
        let (outcomes, raw) = execute_tests(&ctx, &tests, &adapter, artifacts.path()).unwrap();
        assert_eq!(outcomes[0].test_id, "x.n2");
        assert_eq!(raw.exit_code, Some(1));
        let cov = parse_coverage(&raw, TargetLanguage::Python, &tests, project.path()).unwrap();
        assert_eq!(cov.overall.percent, 100.0);
    }

    #[cfg(unix)]
    #[test]
    fn command_adapter_detects_compile_errors_and_timeouts() {
        use std::os::unix::fs::PermissionsExt;
        let project = tempfile::tempdir().unwrap();
        let write_script = |name: &str, body: &str| {
            let p = project.path().join(name);
            fs::write(&p, body).unwrap();
            fs::set_permissions(&p, fs::Permissions::from_mode(0o755)).unwrap();
            p.display().to_string()
        };
        let mut adapter = CommandAdapter::maven();
        adapter.args = vec![];
        adapter.program = write_script("mvn-fail.sh", "#!/bin/sh\necho '[ERROR] COMPILATION ERROR :'\nexit 1\n");
        let ctx = context(project.path(), "p", TargetLanguage::Java);
        let tests = vec![project.path().join("ATest.java")];
        assert!(matches!(execute_tests(&ctx, &tests, &adapter, project.path()), Err(RunnerError::CompilationError(_))));
        adapter.program = write_script("mvn-slow.sh", "#!/bin/sh\nsleep 5\n");
        adapter.timeout_s = 1;
        match execute_tests(&ctx, &tests, &adapter, project.path()) {
            Err(RunnerError::ExecutionEnvironmentError(m)) => assert!(m.contains("timed out"), "{m}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn adapter_config_round_trips_through_toml() {
        let cfg = AdapterConfig::Stub { artifacts_dir: "canned".into(), delay_ms: 5 };
        let text = toml::to_string(&cfg).unwrap();
        assert!(text.contains("kind = \"stub\""));
        let back: AdapterConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        let cmd = AdapterConfig::default_for(TargetLanguage::Java);
        let back: AdapterConfig = toml::from_str(&toml::to_string(&cmd).unwrap()).unwrap();
        assert_eq!(back, cmd);
    }
}
