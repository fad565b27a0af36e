//! Call graph of the code base: requested from the LLM as DOT, validated
//! against a strict subset grammar, with a static scan as fallback.

mod dot;
mod render;
mod scan;

use serde::{Deserialize, Serialize};

pub use dot::{parse_dot, CallGraph, DotParseError};
pub use render::{render_graph, GraphRendering, NO_RELATIONS_NOTE};
pub use scan::{definitions, static_callgraph, Definition};

use crate::gateway::LlmGateway;
use crate::language::TargetLanguage;
use crate::prompts;
use crate::workspace::SourceFile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphOrigin {
    Llm,
    LlmAfterRepair,
    StaticFallback,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedGraph {
    pub graph: CallGraph,
    pub origin: GraphOrigin,
}

pub fn build_callgraph_prompt(sources: &[SourceFile], language: TargetLanguage) -> String {
    prompts::render(
        prompts::CALL_GRAPH,
        &[("language", language.as_str()), ("sources", &prompts::embed_sources(sources, language.fence_tag()))],
    )
}

/// Pulls the DOT text out of a chatty answer: a fenced block mentioning
/// `digraph`, else the span from `digraph` to the last `}`.
pub fn extract_dot(response: &str) -> &str {
    let mut rest = response;
    while let Some(start) = rest.find("```") {
        let after = &rest[start + 3..];
        let body_start = after.find('\n').map(|n| n + 1).unwrap_or(after.len());
        let body = &after[body_start..];
        let Some(end) = body.find("```") else { break };
        if body[..end].contains("digraph") {
            return body[..end].trim();
        }
        rest = &body[end + 3..];
    }
    match (response.find("digraph"), response.rfind('}')) {
        (Some(start), Some(end)) if end > start => &response[start..=end],
        _ => response.trim(),
    }
}

/// Asks the LLM for the graph, retries once with the parse error appended,
/// and falls back to [`static_callgraph`]. Never fails.
pub fn generate_callgraph(sources: &[SourceFile], language: TargetLanguage, gateway: &LlmGateway) -> GeneratedGraph {
    let prompt = build_callgraph_prompt(sources, language);
    let first = match gateway.ask(prompt.clone()) {
        Ok(ex) => parse_dot(extract_dot(&ex.response_text)),
        Err(err) => {
            tracing::warn!("call graph request failed ({err}); using static extraction");
            return GeneratedGraph { graph: static_callgraph(sources, language), origin: GraphOrigin::StaticFallback };
        }
    };
    let error = match first {
        Ok(graph) => return GeneratedGraph { graph, origin: GraphOrigin::Llm },
        Err(error) => error,
    };
    let repair = format!(
        "{prompt}\n\nYour previous answer was rejected: {error}\nAnswer again with only a corrected DOT digraph."
    );
    match gateway.ask(repair).map(|ex| parse_dot(extract_dot(&ex.response_text))) {
        Ok(Ok(graph)) => GeneratedGraph { graph, origin: GraphOrigin::LlmAfterRepair },
        Ok(Err(err)) => {
            tracing::warn!("call graph still invalid after repair ({err}); using static extraction");
            GeneratedGraph { graph: static_callgraph(sources, language), origin: GraphOrigin::StaticFallback }
        }
        Err(err) => {
            tracing::warn!("call graph repair request failed ({err}); using static extraction");
            GeneratedGraph { graph: static_callgraph(sources, language), origin: GraphOrigin::StaticFallback }
        }
    }
}
