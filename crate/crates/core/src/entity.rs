//! Recovers the project name, subfolder and target language from a free-form
//! request. The LLM is asked first; a keyword grammar is the fallback.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::LlmGateway;
use crate::language::TargetLanguage;
use crate::prompts;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedEntities {
    pub project_name: String,
    pub subfolder: Option<String>,
    pub target_language: TargetLanguage,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EntityError {
    #[error("ambiguous prompt: {0}")]
    AmbiguousPrompt(String),
    #[error("invalid entity: {0}")]
    InvalidEntity(String),
}

const PROJECT_KEYS: &[&str] = &["project", "project_name", "name"];
const FOLDER_KEYS: &[&str] = &["folder", "subfolder", "directory"];
const LANGUAGE_KEYS: &[&str] = &["language", "target_language", "lang"];
const EMPTY_VALUES: &[&str] = &["", "none", "unknown", "null", "n/a", "-"];

fn lookup<'a>(raw: &'a BTreeMap<String, String>, keys: &[&str]) -> Option<&'a str> {
    keys.iter()
        .find_map(|k| raw.get(*k))
        .map(|v| v.trim().trim_matches(|c| c == '"' || c == '\'' || c == '`').trim())
        .filter(|v| !EMPTY_VALUES.contains(&v.to_ascii_lowercase().as_str()))
}

fn check_segment(kind: &str, value: &str) -> Result<(), EntityError> {
    if value.contains('/') || value.contains('\\') {
        return Err(EntityError::InvalidEntity(format!("{kind} `{value}` contains a path separator")));
    }
    if value == "." || value == ".." {
        return Err(EntityError::InvalidEntity(format!("{kind} `{value}` is not a directory name")));
    }
    Ok(())
}

/// Enforces the [`ExtractedEntities`] invariants on a raw key/value answer.
pub fn validate_entities(raw: &BTreeMap<String, String>) -> Result<ExtractedEntities, EntityError> {
    let project = lookup(raw, PROJECT_KEYS)
        .ok_or_else(|| EntityError::AmbiguousPrompt("project name could not be determined".into()))?;
    check_segment("project name", project)?;
    let subfolder = lookup(raw, FOLDER_KEYS).map(str::to_string);
    if let Some(folder) = &subfolder {
        check_segment("subfolder", folder)?;
    }
    let language = lookup(raw, LANGUAGE_KEYS)
        .ok_or_else(|| EntityError::AmbiguousPrompt("target language could not be determined".into()))?;
    let target_language = language.parse::<TargetLanguage>().map_err(|e| EntityError::InvalidEntity(e.to_string()))?;
    Ok(ExtractedEntities { project_name: project.to_string(), subfolder, target_language })
}

/// Parses `key: value` lines (keys lowercased, surrounding markdown dropped).
pub fn parse_key_values(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .filter_map(|line| {
            let line = line.trim().trim_start_matches(['-', '*', ' ']);
            let (key, value) = line.split_once(':')?;
            let key = key.trim().trim_matches('*').trim().to_ascii_lowercase().replace(' ', "_");
            if key.is_empty() || key.contains(char::is_whitespace) {
                return None;
            }
            Some((key, value.trim().trim_matches('*').trim().to_string()))
        })
        .collect()
}

/// LLM-first extraction with the deterministic grammar as fallback.
pub fn extract_entities(prompt: &str, gateway: &LlmGateway) -> Result<ExtractedEntities, EntityError> {
    if prompt.trim().is_empty() {
        return Err(EntityError::AmbiguousPrompt("prompt is empty".into()));
    }
    let llm_prompt = prompts::render(prompts::ENTITY_EXTRACTION, &[("request", prompt.trim())]);
    match gateway.ask(llm_prompt) {
        Ok(exchange) => match validate_entities(&parse_key_values(&exchange.response_text)) {
            Ok(entities) => return Ok(entities),
            Err(err) => tracing::info!("LLM entity answer rejected ({err}); using grammar fallback"),
        },
        Err(err) => tracing::info!("LLM entity extraction unavailable ({err}); using grammar fallback"),
    }
    parse_prompt_fallback(prompt)
}

const STOPWORDS: &[&str] = &[
    "a",
    "an",
    "and",
    "at",
    "based",
    "code",
    "create",
    "directory",
    "file",
    "files",
    "folder",
    "for",
    "from",
    "generate",
    "in",
    "inside",
    "is",
    "it",
    "make",
    "my",
    "of",
    "on",
    "our",
    "please",
    "project",
    "specifically",
    "subfolder",
    "test",
    "tests",
    "that",
    "the",
    "this",
    "to",
    "under",
    "unit",
    "using",
    "which",
    "with",
    "within",
    "write",
    "written",
    "your",
];
const NAMING_WORDS: &[&str] = &["named", "called"];
const PROJECT_WORDS: &[&str] = &["project"];
const FOLDER_WORDS: &[&str] = &["folder", "subfolder", "directory"];
const UNSUPPORTED_LANGUAGES: &[&str] = &[
    "c++",
    "cpp",
    "c#",
    "csharp",
    "javascript",
    "typescript",
    "golang",
    "kotlin",
    "ruby",
    "php",
    "swift",
    "scala",
    "rust",
];

#[derive(Debug)]
struct Token {
    word: String,
    /// Clause-ending punctuation directly after the word.
    closes_clause: bool,
}

fn tokenize(prompt: &str) -> Vec<Token> {
    const EDGE: &[char] = &['"', '\'', '`', '(', ')', '[', ']', '{', '}', '*'];
    prompt
        .split_whitespace()
        .filter_map(|raw| {
            let unquoted = raw.trim_matches(EDGE);
            let word = unquoted.trim_end_matches([',', '.', ';', ':', '!', '?']).trim_matches(EDGE);
            if word.is_empty() {
                return None;
            }
            Some(Token { word: word.to_string(), closes_clause: word.len() != unquoted.len() })
        })
        .collect()
}

fn is_language_word(word: &str) -> bool {
    word.split(|c: char| !c.is_ascii_alphanumeric())
        .any(|part| part.eq_ignore_ascii_case("python") || part.eq_ignore_ascii_case("java"))
}

fn is_filler(word: &str) -> bool {
    let lower = word.to_ascii_lowercase();
    STOPWORDS.contains(&lower.as_str()) || NAMING_WORDS.contains(&lower.as_str()) || is_language_word(word)
}

/// Value for a slot introduced by one of `keywords`: the token after the
/// keyword when it continues the same clause, otherwise the token before it.
fn slot(tokens: &[Token], keywords: &[&str]) -> Option<String> {
    for (i, token) in tokens.iter().enumerate() {
        if !keywords.contains(&token.word.to_ascii_lowercase().as_str()) {
            continue;
        }
        if !token.closes_clause {
            let mut next = i + 1;
            if tokens
                .get(next)
                .is_some_and(|t| NAMING_WORDS.contains(&t.word.to_ascii_lowercase().as_str()) && !t.closes_clause)
            {
                next += 1;
            }
            if let Some(candidate) = tokens.get(next).filter(|t| !is_filler(&t.word)) {
                return Some(candidate.word.clone());
            }
        }
        if let Some(prev) = i.checked_sub(1).map(|p| &tokens[p]) {
            if !prev.closes_clause && !is_filler(&prev.word) {
                return Some(prev.word.clone());
            }
        }
    }
    None
}

fn detect_language(prompt: &str) -> Result<TargetLanguage, EntityError> {
    let lower = prompt.to_ascii_lowercase();
    let words: Vec<&str> = lower.split(|c: char| !c.is_ascii_alphanumeric()).collect();
    let python = words.contains(&"python");
    let java = words.contains(&"java");
    match (python, java) {
        (true, false) => Ok(TargetLanguage::Python),
        (false, true) => Ok(TargetLanguage::Java),
        (true, true) => Err(EntityError::AmbiguousPrompt("prompt mentions both Python and Java".into())),
        (false, false) => {
            let coarse: Vec<&str> = lower
                .split(|c: char| c.is_whitespace() || matches!(c, ',' | '.' | ';' | ':' | '!' | '?' | '-' | '(' | ')'))
                .collect();
            match UNSUPPORTED_LANGUAGES.iter().find(|l| coarse.contains(l)) {
                Some(lang) => Err(EntityError::InvalidEntity(format!("unsupported language `{lang}`"))),
                None => Err(EntityError::AmbiguousPrompt("target language could not be determined".into())),
            }
        }
    }
}

/// Deterministic keyword grammar.
///
/// * language: case-insensitive mention of `python` or `java` as a word
/// * project: the token after `project` (skipping `named`/`called`), or the
///   token before it when the next token is filler or a new clause
/// * subfolder: the same rule around `folder`/`subfolder`/`directory`
pub fn parse_prompt_fallback(prompt: &str) -> Result<ExtractedEntities, EntityError> {
    if prompt.trim().is_empty() {
        return Err(EntityError::AmbiguousPrompt("prompt is empty".into()));
    }
    let tokens = tokenize(prompt);
    let project = slot(&tokens, PROJECT_WORDS);
    let folder = slot(&tokens, FOLDER_WORDS);
    let language = detect_language(prompt);
    let project = match (project, &language) {
        (Some(p), _) => p,
        (None, _) => return Err(EntityError::AmbiguousPrompt("no project name found in prompt".into())),
    };
    let language = language?;
    let mut raw = BTreeMap::new();
    raw.insert("project".to_string(), project);
    if let Some(folder) = folder {
        raw.insert("folder".to_string(), folder);
    }
    raw.insert("language".to_string(), language.as_str().to_string());
    validate_entities(&raw)
}
