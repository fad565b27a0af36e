//! Token-level call-graph heuristic used as fallback and cross-check.
//!
//! Nodes are function and method definitions (`Class.method` inside a class,
//! bare names otherwise). An edge `f -> g` is added when `g(` appears in the
//! body of `f` and `g` is a defined node. Overloads, dynamic dispatch and
//! shadowing are not resolved.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;

use super::CallGraph;
use crate::language::TargetLanguage;
use crate::workspace::SourceFile;

/// A definition found by the scanner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Definition {
    pub qualified: String,
    pub short: String,
    pub class: Option<String>,
    pub file: String,
    pub body: String,
}

const JAVA_MODIFIERS: &[&str] =
    &["public", "protected", "private", "static", "final", "abstract", "synchronized", "native", "default", "strictfp"];

const JAVA_KEYWORDS: &[&str] = &[
    "if",
    "for",
    "while",
    "switch",
    "catch",
    "synchronized",
    "return",
    "new",
    "else",
    "try",
    "do",
    "throw",
    "super",
    "this",
    "case",
    "assert",
];

pub fn static_callgraph(sources: &[SourceFile], language: TargetLanguage) -> CallGraph {
    let defs = definitions(sources, language);
    let mut graph = CallGraph::new("callgraph");
    let mut by_short: BTreeMap<&str, Vec<&Definition>> = BTreeMap::new();
    for def in &defs {
        graph.add_node(def.qualified.clone());
        by_short.entry(def.short.as_str()).or_default().push(def);
    }
    for def in &defs {
        for call in call_sites(&def.body, language) {
            let Some(targets) = by_short.get(call.name.as_str()) else { continue };
            let own_class: Vec<&&Definition> =
                targets.iter().filter(|t| call.on_self && t.class.is_some() && t.class == def.class).collect();
            if !own_class.is_empty() {
                for t in own_class {
                    graph.add_edge(def.qualified.clone(), t.qualified.clone());
                }
            } else {
                for t in targets {
                    graph.add_edge(def.qualified.clone(), t.qualified.clone());
                }
            }
        }
    }
    graph
}

pub fn definitions(sources: &[SourceFile], language: TargetLanguage) -> Vec<Definition> {
    sources
        .iter()
        .flat_map(|s| match language {
            TargetLanguage::Python => python_definitions(&s.content, &s.relative_path_str()),
            TargetLanguage::Java => java_definitions(&s.content, &s.relative_path_str()),
        })
        .collect()
}

struct CallSite {
    name: String,
    on_self: bool,
}

fn call_sites(body: &str, language: TargetLanguage) -> Vec<CallSite> {
    static CALL: OnceLock<Regex> = OnceLock::new();
    let re = CALL.get_or_init(|| {
        Regex::new(
            r"(?P<kw>\b(?:def|class|new)\s+)?(?P<recv>\b(?:self|this)\s*\.\s*)?\b(?P<name>[A-Za-z_$][\w$]*)\s*\(",
        )
        .unwrap()
    });
    re.captures_iter(body)
        .filter(|c| c.name("kw").is_none())
        .filter(|c| language != TargetLanguage::Java || !JAVA_KEYWORDS.contains(&&c["name"]))
        .map(|c| CallSite { name: c["name"].to_string(), on_self: c.name("recv").is_some() })
        .collect()
}

fn indent_of(line: &str) -> usize {
    line.chars().take_while(|c| *c == ' ' || *c == '\t').map(|c| if c == '\t' { 8 } else { 1 }).sum()
}

/// Text after the `:` that closes a `def` signature on its first line.
fn after_signature(line: &str) -> &str {
    let Some(open) = line.find('(') else { return "" };
    let mut depth = 0i32;
    for (i, ch) in line[open..].char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 {
                    let rest = &line[open + i + 1..];
                    return rest.find(':').map(|c| &rest[c + 1..]).unwrap_or("");
                }
            }
            _ => {}
        }
    }
    ""
}

fn python_definitions(content: &str, file: &str) -> Vec<Definition> {
    static DEF: OnceLock<Regex> = OnceLock::new();
    static CLASS: OnceLock<Regex> = OnceLock::new();
    let def_re = DEF.get_or_init(|| Regex::new(r"^\s*(?:async\s+)?def\s+([A-Za-z_]\w*)\s*\(").unwrap());
    let class_re = CLASS.get_or_init(|| Regex::new(r"^\s*class\s+([A-Za-z_]\w*)").unwrap());
    let lines: Vec<&str> = content.lines().collect();
    // (indent, is_class, name)
    let mut scope: Vec<(usize, bool, String)> = Vec::new();
    let mut out = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let indent = indent_of(line);
        while scope.last().is_some_and(|(d, _, _)| *d >= indent) {
            scope.pop();
        }
        if let Some(c) = class_re.captures(line) {
            scope.push((indent, true, c[1].to_string()));
            continue;
        }
        let Some(c) = def_re.captures(line) else { continue };
        let short = c[1].to_string();
        let class = match scope.last() {
            Some((_, true, name)) => Some(name.clone()),
            _ => None,
        };
        let mut body = String::from(after_signature(line));
        body.push('\n');
        for next in &lines[i + 1..] {
            if !next.trim().is_empty() && indent_of(next) <= indent {
                break;
            }
            body.push_str(next);
            body.push('\n');
        }
        let qualified = match &class {
            Some(cls) => format!("{cls}.{short}"),
            None => short.clone(),
        };
        scope.push((indent, false, short.clone()));
        out.push(Definition { qualified, short, class, file: file.to_string(), body });
    }
    out
}

/// Blanks out comments and string/char literals, preserving byte offsets.
fn java_code_only(content: &str) -> String {
    let bytes = content.as_bytes();
    let mut out = bytes.to_vec();
    let mut i = 0;
    let blank = |out: &mut Vec<u8>, i: usize| {
        if out[i] != b'\n' {
            out[i] = b' ';
        }
    };
    while i < bytes.len() {
        match bytes[i] {
            b'/' if bytes.get(i + 1) == Some(&b'/') => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    blank(&mut out, i);
                    i += 1;
                }
            }
            b'/' if bytes.get(i + 1) == Some(&b'*') => {
                blank(&mut out, i);
                blank(&mut out, i + 1);
                i += 2;
                while i < bytes.len() && !(bytes[i] == b'*' && bytes.get(i + 1) == Some(&b'/')) {
                    blank(&mut out, i);
                    i += 1;
                }
                for k in i..(i + 2).min(bytes.len()) {
                    blank(&mut out, k);
                }
                i += 2;
            }
            quote @ (b'"' | b'\'') => {
                i += 1;
                while i < bytes.len() && bytes[i] != quote && bytes[i] != b'\n' {
                    if bytes[i] == b'\\' && i + 1 < bytes.len() {
                        blank(&mut out, i);
                        i += 1;
                    }
                    blank(&mut out, i);
                    i += 1;
                }
                i += 1;
            }
            _ => i += 1,
        }
    }
    // only ASCII bytes were replaced, so this is still valid UTF-8
    String::from_utf8(out).unwrap_or_default()
}

fn matching_brace(code: &[u8], open: usize) -> usize {
    let mut depth = 0i32;
    for (i, b) in code.iter().enumerate().skip(open) {
        match b {
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return i;
                }
            }
            _ => {}
        }
    }
    code.len()
}

fn java_definitions(content: &str, file: &str) -> Vec<Definition> {
    static CLASS: OnceLock<Regex> = OnceLock::new();
    static METHOD: OnceLock<Regex> = OnceLock::new();
    let class_re =
        CLASS.get_or_init(|| Regex::new(r"\b(?:class|interface|enum|record)\s+([A-Za-z_$][\w$]*)[^{;]*\{").unwrap());
    let method_re = METHOD.get_or_init(|| {
        Regex::new(
            r"(?P<ret>[A-Za-z_$][\w$]*(?:\s*<[^<>;{}()]*>)?(?:\s*\[\s*\])*)\s+(?P<name>[A-Za-z_$][\w$]*)\s*\([^;{}()]*\)\s*(?:throws\s+[\w$.,\s]+)?\{",
        )
        .unwrap()
    });
    let code = java_code_only(content);
    let bytes = code.as_bytes();
    let classes: Vec<(String, usize, usize)> = class_re
        .captures_iter(&code)
        .map(|c| {
            let whole = c.get(0).unwrap();
            let open = whole.end() - 1;
            (c[1].to_string(), open, matching_brace(bytes, open))
        })
        .collect();
    let mut out = Vec::new();
    for c in method_re.captures_iter(&code) {
        let name = c["name"].to_string();
        let ret = &c["ret"];
        // a modifier in return-type position means a constructor
        if JAVA_KEYWORDS.contains(&name.as_str()) || JAVA_KEYWORDS.contains(&ret) || JAVA_MODIFIERS.contains(&ret) {
            continue;
        }
        let whole = c.get(0).unwrap();
        let open = whole.end() - 1;
        let close = matching_brace(bytes, open);
        let class = classes
            .iter()
            .filter(|(_, start, end)| *start < whole.start() && whole.start() < *end)
            .min_by_key(|(_, start, end)| end - start)
            .map(|(n, _, _)| n.clone());
        let body = code[open + 1..close.min(code.len())].to_string();
        let qualified = match &class {
            Some(cls) => format!("{cls}.{name}"),
            None => name.clone(),
        };
        out.push(Definition { qualified, short: name, class, file: file.to_string(), body });
    }
    out
}
