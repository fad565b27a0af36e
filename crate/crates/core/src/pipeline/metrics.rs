use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{RunRecord, RunStatus, Stage};
use crate::language::TargetLanguage;

/// Stage columns of the metrics table, in display order.
pub const TABLE_STAGES: [Stage; 5] =
    [Stage::TestGeneration, Stage::DotGraph, Stage::EntityRetrieval, Stage::TestExecution, Stage::PdfReport];

const UNKNOWN: &str = "(unknown)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupBy {
    Project,
    Language,
}

impl FromStr for GroupBy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "project" => Ok(GroupBy::Project),
            "language" => Ok(GroupBy::Language),
            other => Err(format!("cannot group by `{other}`; use project or language")),
        }
    }
}

/// Means over one group of runs. Times are in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub group: String,
    pub projects: Vec<String>,
    pub languages: Vec<TargetLanguage>,
    pub runs: usize,
    pub successes: usize,
    pub failures: usize,
    /// Mean over runs that reached project location.
    pub loc: Option<f64>,
    /// Mean over all runs.
    pub total_s: f64,
    /// Mean per stage over the runs that timed that stage.
    pub stage_s: BTreeMap<Stage, f64>,
    /// Mean over runs that produced coverage.
    pub coverage: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub group_by: GroupBy,
    pub rows: Vec<MetricsRow>,
    pub overall: Option<MetricsRow>,
}

/// Half-up rounding to two decimals, tolerant of binary representation
/// (97.335 becomes 97.34).
pub fn round2(x: f64) -> f64 {
    let scaled = x * 100.0;
    let nudged = scaled + scaled.abs() * 1e-12 + 1e-9;
    nudged.round() / 100.0
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn row(group: String, records: &[&RunRecord]) -> MetricsRow {
    let mut projects: Vec<String> = records.iter().filter_map(|r| r.project.clone()).collect();
    projects.sort();
    projects.dedup();
    let mut languages: Vec<TargetLanguage> = records.iter().filter_map(|r| r.language).collect();
    languages.sort_by_key(|l| l.as_str());
    languages.dedup();
    let successes = records.iter().filter(|r| r.status == RunStatus::Success).count();
    let stage_s = Stage::ALL
        .iter()
        .filter_map(|&stage| {
            mean(records.iter().filter_map(|r| r.timing.get(stage)).map(|t| t.duration_us() as f64 / 1e6))
                .map(|m| (stage, m))
        })
        .collect();
    MetricsRow {
        group,
        projects,
        languages,
        runs: records.len(),
        successes,
        failures: records.len() - successes,
        loc: mean(records.iter().filter_map(|r| r.loc).map(|l| l as f64)),
        total_s: mean(records.iter().map(|r| r.timing.total_us as f64 / 1e6)).unwrap_or(0.0),
        stage_s,
        coverage: mean(records.iter().filter_map(|r| r.coverage_overall)),
    }
}

/// Per-group means, rows sorted by group name, plus an overall row.
pub fn aggregate_metrics(records: &[RunRecord], group_by: GroupBy) -> MetricsTable {
    let mut groups: BTreeMap<String, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        let key = match group_by {
            GroupBy::Project => r.project.clone(),
            GroupBy::Language => r.language.map(|l| l.as_str().to_string()),
        };
        groups.entry(key.unwrap_or_else(|| UNKNOWN.to_string())).or_default().push(r);
    }
    let rows = groups.into_iter().map(|(k, rs)| row(k, &rs)).collect();
    let all: Vec<&RunRecord> = records.iter().collect();
    let overall = (!all.is_empty()).then(|| row("All".into(), &all));
    MetricsTable { group_by, rows, overall }
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| format!("{:.2}", round2(v))).unwrap_or_else(|| "-".into())
}

impl MetricsTable {
    pub fn header(&self) -> Vec<&'static str> {
        let mut h = vec!["Project", "Language", "LoC", "Total Time"];
        h.extend(TABLE_STAGES.iter().map(|s| s.title()));
        h.extend(["Coverage %", "Runs", "Succeeded", "Failed"]);
        h
    }

    fn cells(&self, row: &MetricsRow) -> Vec<String> {
        let (project, language) = match self.group_by {
            GroupBy::Project => {
                (row.group.clone(), row.languages.iter().map(|l| l.as_str()).collect::<Vec<_>>().join(", "))
            }
            GroupBy::Language => (row.projects.join(", "), row.group.clone()),
        };
        let mut cells = vec![project, language, opt(row.loc), opt(Some(row.total_s))];
        cells.extend(TABLE_STAGES.iter().map(|s| opt(row.stage_s.get(s).copied())));
        cells.extend([opt(row.coverage), row.runs.to_string(), row.successes.to_string(), row.failures.to_string()]);
        cells
    }

    /// Header plus one line per row and the overall row, as string cells.
    pub fn to_cells(&self) -> Vec<Vec<String>> {
        let mut out = vec![self.header().into_iter().map(String::from).collect::<Vec<_>>()];
        out.extend(self.rows.iter().map(|r| self.cells(r)));
        if let Some(overall) = &self.overall {
            let mut cells = self.cells(overall);
            match self.group_by {
                GroupBy::Project => cells[0] = overall.group.clone(),
                GroupBy::Language => cells[1] = overall.group.clone(),
            }
            out.push(cells);
        }
        out
    }
}

impl fmt::Display for MetricsTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cells = self.to_cells();
        let widths: Vec<usize> =
            (0..cells[0].len()).map(|c| cells.iter().map(|r| r[c].chars().count()).max().unwrap_or(0)).collect();
        for row in &cells {
            let line: Vec<String> =
                row.iter()
                    .enumerate()
                    .map(|(i, cell)| {
                        if i < 2 {
                            format!("{cell:<w$}", w = widths[i])
                        } else {
                            format!("{cell:>w$}", w = widths[i])
                        }
                    })
                    .collect();
            writeln!(f, "{}", line.join("  ").trim_end())?;
        }
        Ok(())
    }
}
