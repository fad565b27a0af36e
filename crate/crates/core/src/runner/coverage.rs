//! Statement coverage artifacts: coverage.py JSON and JaCoCo XML.

use std::path::Path;

use quick_xml::events::Event;
use quick_xml::Reader;
use serde::{Deserialize, Serialize};

use super::RunnerError;

pub const TOTAL_ROW: &str = "TOTAL";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverageFormat {
    /// `coverage json` output (`files.<path>.summary.num_statements` / `missing_lines`).
    CoveragePyJson,
    /// JaCoCo XML; the `LINE` counter of each `sourcefile` is used.
    JacocoXml,
}

/// Percentage of covered statements, rounded half-up to two decimals;
/// 100.00 when there are no statements.
pub fn coverage_percent(statements: u64, missed: u64) -> f64 {
    if statements == 0 {
        return 100.0;
    }
    let covered = statements.saturating_sub(missed.min(statements)) as u128;
    let s = statements as u128;
    // hundredths of a percent, half-up: floor((20000 c + s) / 2s)
    let hundredths = (20_000 * covered + s) / (2 * s);
    hundredths as f64 / 100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRecord {
    pub file: String,
    pub statements: u64,
    pub missed: u64,
    pub percent: f64,
}

impl CoverageRecord {
    pub fn new(file: impl Into<String>, statements: u64, missed: u64) -> Result<Self, RunnerError> {
        let file = file.into();
        if missed > statements {
            return Err(RunnerError::CoverageParseError(format!(
                "{file}: {missed} missed statements out of {statements}"
            )));
        }
        Ok(Self { file, statements, missed, percent: coverage_percent(statements, missed) })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageSummary {
    pub records: Vec<CoverageRecord>,
    pub overall: CoverageRecord,
}

impl CoverageSummary {
    /// Sorts records by file and computes the summed TOTAL row.
    pub fn from_records(mut records: Vec<CoverageRecord>) -> Self {
        records.sort_by(|a, b| a.file.cmp(&b.file));
        let statements = records.iter().map(|r| r.statements).sum();
        let missed = records.iter().map(|r| r.missed).sum();
        let overall = CoverageRecord {
            file: TOTAL_ROW.to_string(),
            statements,
            missed,
            percent: coverage_percent(statements, missed),
        };
        Self { records, overall }
    }

    /// Re-derives the TOTAL row and every percentage.
    pub fn check_invariants(&self) -> Result<(), String> {
        for r in self.records.iter().chain(std::iter::once(&self.overall)) {
            if r.missed > r.statements {
                return Err(format!("{}: missed > statements", r.file));
            }
            if r.percent != coverage_percent(r.statements, r.missed) {
                return Err(format!("{}: percent {} inconsistent", r.file, r.percent));
            }
        }
        let s: u64 = self.records.iter().map(|r| r.statements).sum();
        let m: u64 = self.records.iter().map(|r| r.missed).sum();
        if self.overall.statements != s || self.overall.missed != m {
            return Err("TOTAL row does not equal the column sums".into());
        }
        Ok(())
    }
}

pub(super) fn parse_coveragepy_json(text: &str) -> Result<Vec<CoverageRecord>, RunnerError> {
    let err = |m: String| RunnerError::CoverageParseError(m);
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| err(e.to_string()))?;
    let files = value.get("files").and_then(|f| f.as_object()).ok_or_else(|| err("missing `files` object".into()))?;
    let mut out = Vec::with_capacity(files.len());
    for (path, entry) in files {
        let summary = entry.get("summary").ok_or_else(|| err(format!("{path}: missing summary")))?;
        let field = |name: &str| {
            summary.get(name).and_then(|v| v.as_u64()).ok_or_else(|| err(format!("{path}: missing integer `{name}`")))
        };
        out.push(CoverageRecord::new(path.replace('\\', "/"), field("num_statements")?, field("missing_lines")?)?);
    }
    Ok(out)
}

pub(super) fn parse_jacoco_xml(text: &str) -> Result<Vec<CoverageRecord>, RunnerError> {
    let err = |m: String| RunnerError::CoverageParseError(m);
    let mut reader = Reader::from_str(text);
    let mut stack: Vec<Vec<u8>> = Vec::new();
    let mut package = String::new();
    let mut current: Option<(String, Option<(u64, u64)>)> = None;
    let mut out = Vec::new();
    let mut saw_report = false;
    loop {
        let event = reader.read_event().map_err(|e| err(e.to_string()))?;
        let (element, is_empty) = match &event {
            Event::Start(e) => (Some(e.clone()), false),
            Event::Empty(e) => (Some(e.clone()), true),
            Event::End(_) => {
                let closed = stack.pop();
                match closed.as_deref() {
                    Some(b"sourcefile") => {
                        if let Some((name, counts)) = current.take() {
                            let (missed, covered) = counts.unwrap_or((0, 0));
                            out.push(CoverageRecord::new(name, missed + covered, missed)?);
                        }
                    }
                    Some(b"package") => package.clear(),
                    _ => {}
                }
                continue;
            }
            Event::Eof => break,
            _ => continue,
        };
        let Some(e) = element else { continue };
        let name = e.name().as_ref().to_vec();
        let get = |key: &[u8]| -> Result<Option<String>, RunnerError> {
            for a in e.attributes() {
                let a = a.map_err(|x| err(x.to_string()))?;
                if a.key.as_ref() == key {
                    return Ok(Some(a.unescape_value().map_err(|x| err(x.to_string()))?.into_owned()));
                }
            }
            Ok(None)
        };
        match name.as_slice() {
            b"report" => saw_report = true,
            b"package" => package = get(b"name")?.unwrap_or_default(),
            b"sourcefile" => {
                let file = get(b"name")?.unwrap_or_default();
                let full = if package.is_empty() { file } else { format!("{package}/{file}") };
                current = Some((full, None));
                if is_empty {
                    current = None;
                }
            }
            b"counter"
                if stack.last().map(Vec::as_slice) == Some(b"sourcefile")
                    && get(b"type")?.as_deref() == Some("LINE") =>
            {
                let parse = |v: Option<String>, what: &str| {
                    v.and_then(|s| s.parse::<u64>().ok()).ok_or_else(|| err(format!("bad `{what}` on LINE counter")))
                };
                let missed = parse(get(b"missed")?, "missed")?;
                let covered = parse(get(b"covered")?, "covered")?;
                if let Some((_, counts)) = current.as_mut() {
                    *counts = Some((missed, covered));
                }
            }
            _ => {}
        }
        if !is_empty {
            stack.push(name);
        }
    }
    if !saw_report || !stack.is_empty() {
        return Err(err("incomplete JaCoCo report".into()));
    }
    Ok(out)
}

/// Whether a coverage row names one of the generated test files (or any file
/// following the test naming convention) and so must be left out.
pub(super) fn is_test_row(file: &str, excluded: &[String], is_test_name: impl Fn(&str) -> bool) -> bool {
    let name = Path::new(file).file_name().and_then(|n| n.to_str()).unwrap_or(file);
    is_test_name(name) || excluded.iter().any(|ex| file == ex || file.ends_with(&format!("/{ex}")))
}
