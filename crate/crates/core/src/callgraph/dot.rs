//! Strict DOT subset: one `digraph`, node statements, single `a -> b` edges
//! and an optional `[label="..."]` attribute list. Everything else is
//! rejected with a line/column position.
//!
//! ```text
//! graph  := "digraph" ID? "{" stmt* "}"
//! stmt   := ID ( "->" ID )? attrs? ";"?
//! attrs  := "[" ( "label" "=" ID ( "," | ";" )? )* "]"
//! ID     := [A-Za-z0-9_]+ | '"' ( [^"\\] | '\' any )* '"'
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const KEYWORDS: &[&str] = &["digraph", "graph", "node", "edge", "subgraph", "strict"];

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallGraph {
    pub name: String,
    pub nodes: BTreeSet<String>,
    pub edges: BTreeSet<(String, String)>,
    pub node_labels: BTreeMap<String, String>,
    pub edge_labels: BTreeMap<(String, String), String>,
}

impl CallGraph {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), ..Self::default() }
    }

    pub fn add_node(&mut self, node: impl Into<String>) {
        self.nodes.insert(node.into());
    }

    pub fn add_edge(&mut self, caller: impl Into<String>, callee: impl Into<String>) {
        let (caller, callee) = (caller.into(), callee.into());
        self.nodes.insert(caller.clone());
        self.nodes.insert(callee.clone());
        self.edges.insert((caller, callee));
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Canonical serialization: nodes sorted, then edges sorted, one
    /// statement per line.
    pub fn dot_text(&self) -> String {
        let mut out = String::from("digraph ");
        if !self.name.is_empty() {
            out.push_str(&quote_id(&self.name));
            out.push(' ');
        }
        out.push_str("{\n");
        for node in &self.nodes {
            out.push_str("  ");
            out.push_str(&quote_id(node));
            if let Some(label) = self.node_labels.get(node) {
                out.push_str(&format!(" [label={}]", quote_string(label)));
            }
            out.push_str(";\n");
        }
        for edge in &self.edges {
            out.push_str(&format!("  {} -> {}", quote_id(&edge.0), quote_id(&edge.1)));
            if let Some(label) = self.edge_labels.get(edge) {
                out.push_str(&format!(" [label={}]", quote_string(label)));
            }
            out.push_str(";\n");
        }
        out.push_str("}\n");
        out
    }
}

fn is_bare_id(s: &str) -> bool {
    !s.is_empty()
        && s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_')
        && !KEYWORDS.iter().any(|k| k.eq_ignore_ascii_case(s))
}

fn quote_id(s: &str) -> String {
    if is_bare_id(s) {
        s.to_string()
    } else {
        quote_string(s)
    }
}

fn quote_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            other => out.push(other),
        }
    }
    out.push('"');
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("DOT parse error at line {line}, column {column}: {message}")]
pub struct DotParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Id { text: String, quoted: bool },
    Arrow,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Equals,
    Semi,
    Comma,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Id { text, .. } => write!(f, "identifier `{text}`"),
            Tok::Arrow => f.write_str("`->`"),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::LBracket => f.write_str("`[`"),
            Tok::RBracket => f.write_str("`]`"),
            Tok::Equals => f.write_str("`=`"),
            Tok::Semi => f.write_str("`;`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, DotParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut column) = (0usize, 1usize, 1usize);
    let err = |line, column, message: String| DotParseError { line, column, message };
    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, column);
        let advance = |i: &mut usize, line: &mut usize, column: &mut usize| {
            if chars[*i] == '\n' {
                *line += 1;
                *column = 1;
            } else {
                *column += 1;
            }
            *i += 1;
        };
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut column);
            continue;
        }
        let simple = match c {
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            '=' => Some(Tok::Equals),
            ';' => Some(Tok::Semi),
            ',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(tok) = simple {
            advance(&mut i, &mut line, &mut column);
            out.push(Spanned { tok, line: start_line, column: start_col });
            continue;
        }
        if c == '-' {
            if chars.get(i + 1) == Some(&'>') {
                advance(&mut i, &mut line, &mut column);
                advance(&mut i, &mut line, &mut column);
                out.push(Spanned { tok: Tok::Arrow, line: start_line, column: start_col });
                continue;
            }
            return Err(err(start_line, start_col, "expected `->`".into()));
        }
        if c == '"' {
            advance(&mut i, &mut line, &mut column);
            let mut text = String::new();
            loop {
                let Some(&ch) = chars.get(i) else {
                    return Err(err(start_line, start_col, "unterminated string".into()));
                };
                advance(&mut i, &mut line, &mut column);
                match ch {
                    '"' => break,
                    '\\' => {
                        let Some(&next) = chars.get(i) else {
                            return Err(err(start_line, start_col, "unterminated string".into()));
                        };
                        advance(&mut i, &mut line, &mut column);
                        match next {
                            '"' => text.push('"'),
                            '\\' => text.push('\\'),
                            'n' => text.push('\n'),
                            other => {
                                text.push('\\');
                                text.push(other);
                            }
                        }
                    }
                    other => text.push(other),
                }
            }
            out.push(Spanned { tok: Tok::Id { text, quoted: true }, line: start_line, column: start_col });
            continue;
        }
        if c.is_ascii_alphanumeric() || c == '_' {
            let mut text = String::new();
            while let Some(&ch) = chars.get(i).filter(|ch| ch.is_ascii_alphanumeric() || **ch == '_') {
                text.push(ch);
                advance(&mut i, &mut line, &mut column);
            }
            out.push(Spanned { tok: Tok::Id { text, quoted: false }, line: start_line, column: start_col });
            continue;
        }
        return Err(err(start_line, start_col, format!("unexpected character `{c}`")));
    }
    out.push(Spanned { tok: Tok::Eof, line, column });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos.min(self.toks.len() - 1)]
    }

    fn bump(&mut self) -> Spanned {
        let t = self.peek().clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, message: impl Into<String>) -> DotParseError {
        let t = self.peek();
        DotParseError { line: t.line, column: t.column, message: message.into() }
    }

    fn expect(&mut self, want: Tok) -> Result<(), DotParseError> {
        if self.peek().tok == want {
            self.bump();
            Ok(())
        } else {
            Err(self.error_here(format!("expected {want}, found {}", self.peek().tok)))
        }
    }

    fn id(&mut self, what: &str) -> Result<String, DotParseError> {
        match &self.peek().tok {
            Tok::Id { text, quoted } => {
                if !quoted && KEYWORDS.iter().any(|k| k.eq_ignore_ascii_case(text)) {
                    return Err(self.error_here(format!("keyword `{text}` is not supported here")));
                }
                let text = text.clone();
                self.bump();
                Ok(text)
            }
            other => Err(self.error_here(format!("expected {what}, found {other}"))),
        }
    }

    fn attrs(&mut self) -> Result<Option<String>, DotParseError> {
        if self.peek().tok != Tok::LBracket {
            return Ok(None);
        }
        self.bump();
        let mut label = None;
        loop {
            if self.peek().tok == Tok::RBracket {
                self.bump();
                return Ok(label);
            }
            let key_pos = self.peek().clone();
            let key = self.id("attribute name")?;
            if key != "label" {
                return Err(DotParseError {
                    line: key_pos.line,
                    column: key_pos.column,
                    message: format!("unsupported attribute `{key}` (only `label` is accepted)"),
                });
            }
            self.expect(Tok::Equals)?;
            label = Some(self.id("attribute value")?);
            if matches!(self.peek().tok, Tok::Comma | Tok::Semi) {
                self.bump();
            }
        }
    }
}

pub fn parse_dot(text: &str) -> Result<CallGraph, DotParseError> {
    let mut p = Parser { toks: lex(text)?, pos: 0 };
    match &p.peek().tok {
        Tok::Id { text, quoted: false } if text == "digraph" => {
            p.bump();
        }
        other => return Err(p.error_here(format!("expected `digraph`, found {other}"))),
    }
    let mut graph = CallGraph::default();
    if matches!(p.peek().tok, Tok::Id { .. }) {
        graph.name = p.id("graph name")?;
    }
    p.expect(Tok::LBrace)?;
    loop {
        match p.peek().tok {
            Tok::RBrace => {
                p.bump();
                break;
            }
            Tok::Eof => return Err(p.error_here("expected `}` to close the digraph, found end of input")),
            _ => {}
        }
        let from = p.id("node identifier")?;
        if p.peek().tok == Tok::Arrow {
            p.bump();
            let to = p.id("edge target")?;
            let edge = (from.clone(), to.clone());
            graph.add_edge(from, to);
            if let Some(label) = p.attrs()? {
                graph.edge_labels.insert(edge, label);
            }
        } else {
            graph.add_node(from.clone());
            if let Some(label) = p.attrs()? {
                graph.node_labels.insert(from, label);
            }
        }
        if p.peek().tok == Tok::Semi {
            p.bump();
        }
    }
    if p.peek().tok != Tok::Eof {
        return Err(p.error_here(format!("unexpected {} after the closing `}}`", p.peek().tok)));
    }
    Ok(graph)
}
