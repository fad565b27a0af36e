//! Deterministic offline provider. It answers each prompt task from the
//! prompt text alone, so runs against it are reproducible and need no network.

use std::collections::BTreeMap;
use std::time::Duration;

use super::{LlmRequest, Transport, TransportError};
use crate::callgraph::{definitions, static_callgraph, Definition};
use crate::entity::parse_prompt_fallback;
use crate::language::TargetLanguage;
use crate::prompts::{self, PromptTask};
use crate::synth::{render_generation_response, test_path_for, GeneratedTestSuite, TestFile, TestRationale};
use crate::workspace::SourceFile;

#[derive(Debug, Clone, Copy, Default)]
pub struct StubTransport;

impl Transport for StubTransport {
    fn send(&self, request: &LlmRequest, _timeout: Duration) -> Result<String, TransportError> {
        let prompt = request.prompt.as_str();
        match PromptTask::detect(prompt) {
            Some(PromptTask::EntityExtraction) => Ok(answer_entities(prompt)),
            Some(PromptTask::TestGeneration) => {
                let (sources, language) = sources_and_language(prompt)?;
                Ok(render_generation_response(&stub_suite(&sources, language), language))
            }
            Some(PromptTask::CallGraph) => {
                let (sources, language) = sources_and_language(prompt)?;
                Ok(static_callgraph(&sources, language).dot_text())
            }
            None => Err(TransportError::fatal("stub provider does not recognize this prompt")),
        }
    }
}

fn answer_entities(prompt: &str) -> String {
    let request = prompt.split_once("\nRequest:").map(|(_, r)| r).unwrap_or(prompt);
    match parse_prompt_fallback(request) {
        Ok(e) => format!(
            "project: {}\nfolder: {}\nlanguage: {}\n",
            e.project_name,
            e.subfolder.as_deref().unwrap_or("none"),
            e.target_language
        ),
        Err(_) => "project: unknown\nfolder: unknown\nlanguage: unknown\n".into(),
    }
}

fn sources_and_language(prompt: &str) -> Result<(Vec<SourceFile>, TargetLanguage), TransportError> {
    let language = prompts::header_value(prompt, "Language")
        .and_then(|l| l.parse().ok())
        .ok_or_else(|| TransportError::fatal("prompt has no supported `Language:` header"))?;
    let sources = prompts::extract_embedded_sources(prompt)
        .into_iter()
        .map(|(path, content)| SourceFile::new(path, content))
        .collect();
    Ok((sources, language))
}

/// One test file per source with one smoke test per definition.
pub(crate) fn stub_suite(sources: &[SourceFile], language: TargetLanguage) -> GeneratedTestSuite {
    let defs = definitions(sources, language);
    let mut by_file: BTreeMap<&str, Vec<&Definition>> = BTreeMap::new();
    for d in &defs {
        by_file.entry(d.file.as_str()).or_default().push(d);
    }
    let mut suite = GeneratedTestSuite { test_files: Vec::new(), rationales: Vec::new() };
    for source in sources {
        let path = source.relative_path_str();
        let Some(file_defs) = by_file.get(path.as_str()) else { continue };
        let content = match language {
            TargetLanguage::Python => python_tests(source, file_defs),
            TargetLanguage::Java => java_tests(source, file_defs),
        };
        suite.test_files.push(TestFile { relative_path: test_path_for(&path, language), content });
        for d in file_defs {
            suite.rationales.push(TestRationale {
                source_file: path.clone(),
                function_name: d.qualified.clone(),
                basic_cases: vec![format!("{} is defined and reachable from the test module", d.qualified)],
                edge_cases: Vec::new(),
            });
        }
    }
    suite
}

fn python_tests(source: &SourceFile, defs: &[&Definition]) -> String {
    let module = source.stem();
    let mut out = format!("import {module}\n");
    for (i, d) in defs.iter().enumerate() {
        let name = d.qualified.replace('.', "_");
        out.push_str(&format!("\n\ndef test_{name}_{i}():\n"));
        match &d.class {
            Some(class) => out.push_str(&format!("    assert hasattr({module}.{class}, \"{}\")\n", d.short)),
            None => out.push_str(&format!("    assert callable({module}.{})\n", d.short)),
        }
    }
    out
}

fn java_tests(source: &SourceFile, defs: &[&Definition]) -> String {
    let class = source.stem();
    let package = source
        .content
        .lines()
        .map(str::trim)
        .find(|l| l.starts_with("package ") && l.ends_with(';'))
        .map(|l| format!("{l}\n\n"))
        .unwrap_or_default();
    let mut out = format!(
        "{package}import static org.junit.jupiter.api.Assertions.assertTrue;\n\n\
         import java.util.Arrays;\nimport org.junit.jupiter.api.Test;\n\nclass {class}Test {{\n"
    );
    for (i, d) in defs.iter().enumerate() {
        let owner = d.class.as_deref().unwrap_or(class);
        let check = format!(
            "Arrays.stream({owner}.class.getDeclaredMethods()).anyMatch(m -> m.getName().equals(\"{}\"))",
            d.short
        );
        out.push_str(&format!(
            "\n    @Test\n    void {}{i}() {{\n        assertTrue({check});\n    }}\n",
            d.qualified.replace('.', "_")
        ));
    }
    out.push_str("}\n");
    out
}
