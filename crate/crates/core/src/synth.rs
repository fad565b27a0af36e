//! Test synthesis: the generation prompt, the response contract parser, and
//! writing the generated files into the project.
//!
//! Response contract (documented in the README):
//!
//! ```text
//! FILE: test_calc.py
//! ```python
//! ...complete file...
//! ```
//!
//! RATIONALE
//! Source: calc.py
//! Function: add
//! Basic case: sums two integers
//! Edge cases: Not applicable
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{GatewayError, LlmGateway};
use crate::language::TargetLanguage;
use crate::prompts;
use crate::workspace::{slash_path, ProjectContext, SourceFile};

pub const DEFAULT_PROMPT_BUDGET_BYTES: usize = 64 * 1024;
pub const NOT_APPLICABLE: &str = "Not applicable";
const UNSPECIFIED_SOURCE: &str = "(unspecified)";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestFile {
    /// Relative to the context's `target_dir`, `/`-separated.
    pub relative_path: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestRationale {
    pub source_file: String,
    pub function_name: String,
    pub basic_cases: Vec<String>,
    pub edge_cases: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedTestSuite {
    pub test_files: Vec<TestFile>,
    pub rationales: Vec<TestRationale>,
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("sources total {actual} bytes, over the prompt budget of {limit} bytes")]
    PromptTooLarge { limit: usize, actual: usize },
    #[error("no sources to generate tests for")]
    EmptySources,
    #[error("could not recover any test file from the LLM response: {0}")]
    GenerationParseFailure(String),
    #[error("cannot write test file {path}: {message}")]
    WriteFailure { path: String, message: String },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

fn naming_rule(language: TargetLanguage) -> &'static str {
    match language {
        TargetLanguage::Python => "test_<module>.py for a module <module>.py",
        TargetLanguage::Java => "<Class>Test.java for a class <Class>.java, in the same package directory",
    }
}

/// Conventional test file path for a source path.
pub fn test_path_for(source: &str, language: TargetLanguage) -> String {
    let path = Path::new(source);
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("module");
    let name = match language {
        TargetLanguage::Python => format!("test_{stem}.py"),
        TargetLanguage::Java => format!("{stem}Test.java"),
    };
    match path.parent().map(slash_path).filter(|p| !p.is_empty()) {
        Some(dir) => format!("{dir}/{name}"),
        None => name,
    }
}

pub fn build_generation_prompt(
    sources: &[SourceFile],
    language: TargetLanguage,
    budget_bytes: usize,
) -> Result<String, SynthError> {
    if sources.is_empty() {
        return Err(SynthError::EmptySources);
    }
    let actual: usize = sources.iter().map(|s| s.content.len()).sum();
    if actual > budget_bytes {
        return Err(SynthError::PromptTooLarge { limit: budget_bytes, actual });
    }
    let mut sorted: Vec<SourceFile> = sources.to_vec();
    sorted.sort_by(|a, b| a.relative_path.cmp(&b.relative_path));
    let example = test_path_for(&sorted[0].relative_path_str(), language);
    Ok(prompts::render(
        prompts::TEST_GENERATION,
        &[
            ("language", language.as_str()),
            ("fence_tag", language.fence_tag()),
            ("example_test_path", &example),
            ("naming_rule", naming_rule(language)),
            ("sources", &prompts::embed_sources(&sorted, language.fence_tag())),
        ],
    ))
}

fn strip_decoration(line: &str) -> &str {
    line.trim().trim_start_matches(['#', '-', '*', '>']).trim().trim_matches('*').trim()
}

/// Splits `Key: value` when the key matches one of `keys` case-insensitively.
fn keyed<'a>(line: &'a str, keys: &[&str]) -> Option<&'a str> {
    let (key, value) = line.split_once(':')?;
    let key = key.trim().trim_matches('*').trim();
    keys.iter().any(|k| k.eq_ignore_ascii_case(key)).then(|| value.trim().trim_matches('*').trim())
}

fn clean_path(raw: &str) -> String {
    raw.trim().trim_matches(|c| c == '`' || c == '"' || c == '\'' || c == '*').trim().to_string()
}

fn is_not_applicable(text: &str) -> bool {
    let t = text.trim().trim_end_matches('.').to_ascii_lowercase();
    matches!(t.as_str(), "not applicable" | "n/a" | "none" | "na" | "")
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum ListKind {
    Basic,
    Edge,
}

#[derive(Default)]
struct RationaleBuilder {
    order: Vec<(String, String)>,
    entries: BTreeMap<(String, String), (Vec<String>, Vec<String>)>,
}

impl RationaleBuilder {
    fn push(&mut self, source: &str, function: &str, kind: ListKind, text: &str) {
        let key = (source.to_string(), function.to_string());
        if !self.entries.contains_key(&key) {
            self.order.push(key.clone());
        }
        let entry = self.entries.entry(key).or_default();
        if is_not_applicable(text) {
            return;
        }
        match kind {
            ListKind::Basic => entry.0.push(text.to_string()),
            ListKind::Edge => entry.1.push(text.to_string()),
        }
    }

    fn touch(&mut self, source: &str, function: &str) {
        let key = (source.to_string(), function.to_string());
        if !self.entries.contains_key(&key) {
            self.order.push(key.clone());
            self.entries.insert(key, Default::default());
        }
    }

    fn finish(mut self) -> Vec<TestRationale> {
        self.order
            .into_iter()
            .filter_map(|key| {
                let (basic, edge) = self.entries.remove(&key)?;
                if basic.is_empty() {
                    tracing::warn!("dropping rationale for {} without a basic case", key.1);
                    return None;
                }
                Some(TestRationale { source_file: key.0, function_name: key.1, basic_cases: basic, edge_cases: edge })
            })
            .collect()
    }
}

/// Parses an LLM answer in the response contract. Prose around the contract
/// is ignored; fenced blocks without a preceding `FILE:` line are skipped, as
/// are files that break the language's test naming convention.
pub fn parse_generation_response(response: &str, language: TargetLanguage) -> Result<GeneratedTestSuite, SynthError> {
    let lines: Vec<&str> = response.lines().collect();
    let mut files: Vec<TestFile> = Vec::new();
    let mut rationale = RationaleBuilder::default();
    let mut pending: Option<String> = None;
    let mut in_rationale = false;
    let mut source = UNSPECIFIED_SOURCE.to_string();
    let mut function: Option<String> = None;
    let mut list: Option<ListKind> = None;
    let mut i = 0;
    while i < lines.len() {
        let line = lines[i];
        let trimmed = line.trim();
        i += 1;
        if trimmed.starts_with("```") {
            let fence: String = trimmed.chars().take_while(|c| *c == '`').collect();
            let mut content = String::new();
            while i < lines.len() && lines[i].trim_end() != fence {
                content.push_str(lines[i]);
                content.push('\n');
                i += 1;
            }
            i += 1;
            if let Some(path) = pending.take() {
                files.push(TestFile { relative_path: path, content });
            }
            continue;
        }
        let plain = strip_decoration(line);
        if let Some(path) = keyed(plain, &["FILE"]).filter(|_| trimmed.contains(':')) {
            if !in_rationale || plain.starts_with("FILE") {
                pending = Some(clean_path(path));
                continue;
            }
        }
        if plain.trim_end_matches(':').eq_ignore_ascii_case("RATIONALE") {
            in_rationale = true;
            continue;
        }
        if !in_rationale {
            continue;
        }
        if let Some(value) = keyed(plain, &["Source", "Source file"]) {
            source = clean_path(value);
            function = None;
            list = None;
        } else if let Some(value) = keyed(plain, &["Function", "Method", "Test"]) {
            let name = clean_path(value);
            rationale.touch(&source, &name);
            function = Some(name);
            list = None;
        } else if let Some(value) = keyed(plain, &["Basic case", "Basic cases"]) {
            if let Some(f) = &function {
                list = Some(ListKind::Basic);
                if !value.is_empty() {
                    rationale.push(&source, f, ListKind::Basic, value);
                }
            }
        } else if let Some(value) = keyed(plain, &["Edge case", "Edge cases"]) {
            if let Some(f) = &function {
                list = Some(ListKind::Edge);
                if !value.is_empty() {
                    rationale.push(&source, f, ListKind::Edge, value);
                }
            }
        } else if let (Some(f), Some(kind)) = (&function, list) {
            let item = trimmed.strip_prefix("- ").or_else(|| trimmed.strip_prefix("* "));
            if let Some(item) = item.map(str::trim).filter(|t| !t.is_empty()) {
                rationale.push(&source, f, kind, item);
            } else if trimmed.is_empty() {
                list = None;
            }
        }
    }
    let total = files.len();
    let test_files: Vec<TestFile> = files
        .into_iter()
        .filter(|f| {
            let name = f.relative_path.rsplit('/').next().unwrap_or_default();
            let ok = language.is_test_file_name(name);
            if !ok {
                tracing::warn!("ignoring generated file {} (not a {language} test file name)", f.relative_path);
            }
            ok
        })
        .collect();
    if test_files.is_empty() {
        return Err(SynthError::GenerationParseFailure(if total == 0 {
            "no `FILE:`-labelled code block found".into()
        } else {
            format!("{total} labelled block(s) found but none is named like a {language} test file")
        }));
    }
    Ok(GeneratedTestSuite { test_files, rationales: rationale.finish() })
}

/// Renders a suite in the response contract; parsing the result yields the
/// same suite.
pub fn render_generation_response(suite: &GeneratedTestSuite, language: TargetLanguage) -> String {
    let mut out = String::new();
    for file in &suite.test_files {
        let fence = prompts::fence_for(&file.content);
        out.push_str(&format!("FILE: {}\n{fence}{}\n", file.relative_path, language.fence_tag()));
        out.push_str(&file.content);
        if !file.content.is_empty() && !file.content.ends_with('\n') {
            out.push('\n');
        }
        out.push_str(&fence);
        out.push_str("\n\n");
    }
    out.push_str("RATIONALE\n");
    for r in &suite.rationales {
        out.push_str(&format!("\nSource: {}\nFunction: {}\n", r.source_file, r.function_name));
        for case in &r.basic_cases {
            out.push_str(&format!("Basic case: {case}\n"));
        }
        if r.edge_cases.is_empty() {
            out.push_str(&format!("Edge cases: {NOT_APPLICABLE}\n"));
        }
        for case in &r.edge_cases {
            out.push_str(&format!("Edge cases: {case}\n"));
        }
    }
    out
}

fn safe_relative(path: &str) -> Result<PathBuf, String> {
    let p = Path::new(path);
    if path.is_empty() {
        return Err("empty path".into());
    }
    if p.is_absolute() {
        return Err("absolute paths are not allowed".into());
    }
    for component in p.components() {
        match component {
            Component::Normal(_) => {}
            _ => return Err("path leaves the target directory".into()),
        }
    }
    Ok(p.to_path_buf())
}

/// Writes the suite under `context.target_dir`, overwriting earlier output.
/// Returns the absolute paths written, in suite order.
pub fn write_test_files(suite: &GeneratedTestSuite, context: &ProjectContext) -> Result<Vec<PathBuf>, SynthError> {
    let target = context.target_dir.canonicalize().map_err(|e| SynthError::WriteFailure {
        path: context.target_dir.display().to_string(),
        message: e.to_string(),
    })?;
    let mut written = Vec::with_capacity(suite.test_files.len());
    for file in &suite.test_files {
        let fail = |message: String| SynthError::WriteFailure { path: file.relative_path.clone(), message };
        let relative = safe_relative(&file.relative_path).map_err(fail)?;
        let name = relative.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if !context.target_language.is_test_file_name(name) {
            return Err(fail(format!(
                "`{name}` does not follow the {} test naming convention",
                context.target_language
            )));
        }
        let destination = target.join(&relative);
        let parent = destination.parent().unwrap_or(&target);
        fs::create_dir_all(parent).map_err(|e| fail(e.to_string()))?;
        let real_parent = parent.canonicalize().map_err(|e| fail(e.to_string()))?;
        if !real_parent.starts_with(&target) {
            return Err(fail("path resolves outside the target directory".into()));
        }
        let destination = real_parent.join(destination.file_name().unwrap_or_default());
        if destination.is_symlink() {
            return Err(fail("refusing to write through a symlink".into()));
        }
        fs::write(&destination, &file.content).map_err(|e| fail(e.to_string()))?;
        written.push(destination);
    }
    Ok(written)
}

/// Prompt, call, parse.
pub fn generate_tests(
    sources: &[SourceFile],
    language: TargetLanguage,
    gateway: &LlmGateway,
    budget_bytes: usize,
) -> Result<GeneratedTestSuite, SynthError> {
    let prompt = build_generation_prompt(sources, language, budget_bytes)?;
    let exchange = gateway.ask(prompt)?;
    parse_generation_response(&exchange.response_text, language)
}
