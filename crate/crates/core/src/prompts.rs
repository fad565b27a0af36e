//! Versioned prompt templates shipped with the crate.
//!
//! Templates use `{{name}}` placeholders. Every template starts with a
//! `### testpilot task: <task> v<N>` marker line; the stub provider keys its
//! canned behavior off that line.

use crate::workspace::SourceFile;

pub const ENTITY_EXTRACTION: &str = include_str!("../assets/prompts/entity_extraction.v1.txt");
pub const TEST_GENERATION: &str = include_str!("../assets/prompts/generation.v1.txt");
pub const CALL_GRAPH: &str = include_str!("../assets/prompts/callgraph.v1.txt");

pub const TASK_MARKER: &str = "### testpilot task: ";
pub const SOURCE_HEADER_PREFIX: &str = "=== SOURCE: ";
pub const SOURCE_HEADER_SUFFIX: &str = " ===";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptTask {
    EntityExtraction,
    TestGeneration,
    CallGraph,
}

impl PromptTask {
    /// Recognizes the task from the marker line at the top of a prompt.
    pub fn detect(prompt: &str) -> Option<Self> {
        let first = prompt.trim_start().lines().next()?;
        let rest = first.strip_prefix(TASK_MARKER)?;
        match rest.split_whitespace().next()? {
            "entity-extraction" => Some(PromptTask::EntityExtraction),
            "test-generation" => Some(PromptTask::TestGeneration),
            "call-graph" => Some(PromptTask::CallGraph),
            _ => None,
        }
    }
}

/// Substitutes `{{key}}` placeholders. Unknown placeholders are left as-is.
pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (key, value) in vars {
        out = out.replace(&format!("{{{{{key}}}}}"), value);
    }
    out
}

/// Shortest backtick fence (at least three) that does not occur in `content`.
pub fn fence_for(content: &str) -> String {
    let mut longest = 0usize;
    let mut run = 0usize;
    for ch in content.chars() {
        if ch == '`' {
            run += 1;
            longest = longest.max(run);
        } else {
            run = 0;
        }
    }
    "`".repeat((longest + 1).max(3))
}

/// Embeds each source as a path header plus a fenced block, in the given order.
pub fn embed_sources(sources: &[SourceFile], fence_tag: &str) -> String {
    let mut out = String::new();
    for source in sources {
        let fence = fence_for(&source.content);
        out.push_str(SOURCE_HEADER_PREFIX);
        out.push_str(&source.relative_path_str());
        out.push_str(SOURCE_HEADER_SUFFIX);
        out.push('\n');
        out.push_str(&fence);
        out.push_str(fence_tag);
        out.push('\n');
        out.push_str(&source.content);
        if !source.content.ends_with('\n') {
            out.push('\n');
        }
        out.push_str(&fence);
        out.push_str("\n\n");
    }
    out
}

/// Inverse of [`embed_sources`]: recovers `(path, content)` pairs from a prompt.
pub fn extract_embedded_sources(prompt: &str) -> Vec<(String, String)> {
    let mut found = Vec::new();
    let mut lines = prompt.lines();
    while let Some(line) = lines.next() {
        let Some(path) =
            line.strip_prefix(SOURCE_HEADER_PREFIX).and_then(|rest| rest.strip_suffix(SOURCE_HEADER_SUFFIX))
        else {
            continue;
        };
        let Some(open) = lines.next() else { break };
        let fence: String = open.chars().take_while(|c| *c == '`').collect();
        if fence.len() < 3 {
            continue;
        }
        let mut content = String::new();
        for body in lines.by_ref() {
            if body == fence {
                break;
            }
            content.push_str(body);
            content.push('\n');
        }
        found.push((path.to_string(), content));
    }
    found
}

/// Value of a `Key: value` line anywhere in the prompt.
pub fn header_value<'a>(prompt: &'a str, key: &str) -> Option<&'a str> {
    prompt.lines().find_map(|line| line.strip_prefix(key)?.strip_prefix(':').map(str::trim))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workspace::SourceFile;

    #[test]
    fn templates_carry_task_markers() {
        assert_eq!(PromptTask::detect(ENTITY_EXTRACTION), Some(PromptTask::EntityExtraction));
        assert_eq!(PromptTask::detect(TEST_GENERATION), Some(PromptTask::TestGeneration));
        assert_eq!(PromptTask::detect(CALL_GRAPH), Some(PromptTask::CallGraph));
        assert_eq!(PromptTask::detect("hello"), None);
    }

    #[test]
    fn embedded_sources_round_trip() {
        let sources = vec![
            SourceFile::new("a.py", "def a():\n    return 1\n"),
            SourceFile::new("pkg/b.py", "s = '```'\n"),
            SourceFile::new("c.py", "no newline"),
        ];
        let text = embed_sources(&sources, "python");
        let back = extract_embedded_sources(&text);
        assert_eq!(back.len(), 3);
        assert_eq!(back[0], ("a.py".to_string(), "def a():\n    return 1\n".to_string()));
        assert_eq!(back[1].1, "s = '```'\n");
        assert_eq!(back[2].1, "no newline\n");
    }

    #[test]
    fn render_replaces_all_occurrences() {
        assert_eq!(render("{{x}}-{{x}} {{y}}", &[("x", "1")]), "1-1 {{y}}");
    }
}
