use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::defense::DefenseReport;
use crate::metrics::AsrReport;

use super::ScenarioError;

/// Per-label precisions of one attack configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrecisionTable {
    pub name: String,
    pub report: AsrReport,
}

/// A curve such as ASR against sample count or against day.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub x_label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn y_at(&self, x: f64) -> Option<f64> {
        self.points.iter().find(|p| p.0 == x).map(|p| p.1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub label: String,
    pub values: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
}

impl Table {
    pub fn cell(&self, row: &str, column: &str) -> Option<f64> {
        let c = self.columns.iter().position(|x| x == column)?;
        self.rows.iter().find(|r| r.label == row)?.values.get(c).copied().flatten()
    }
}

/// How well timing recovered token counts for one strategy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PearsonRow {
    pub name: String,
    /// Correlation of observed duration with true token count.
    pub duration_tokens: f64,
    /// Correlation of estimated with true token count.
    pub estimate_tokens: f64,
    pub mean_abs_token_error: f64,
    pub clamped: usize,
}

/// Everything a scenario run reports.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub scenario: String,
    pub seed: u64,
    pub precision_tables: Vec<PrecisionTable>,
    pub series: Vec<Series>,
    pub tables: Vec<Table>,
    pub pearson: Vec<PearsonRow>,
    pub defenses: Vec<DefenseReport>,
}

impl ReportBundle {
    pub fn new(scenario: &str, seed: u64) -> Self {
        ReportBundle {
            scenario: scenario.to_owned(),
            seed,
            ..ReportBundle::default()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.precision_tables.is_empty()
            && self.series.is_empty()
            && self.tables.is_empty()
            && self.pearson.is_empty()
            && self.defenses.is_empty()
    }

    pub fn series(&self, name: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.name == name)
    }

    pub fn table(&self, title: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.title == title)
    }

    pub fn precision_table(&self, name: &str) -> Option<&AsrReport> {
        self.precision_tables.iter().find(|t| t.name == name).map(|t| &t.report)
    }

    pub fn pearson_row(&self, name: &str) -> Option<&PearsonRow> {
        self.pearson.iter().find(|p| p.name == name)
    }

    pub fn defense(&self, name: &str) -> Option<&DefenseReport> {
        self.defenses.iter().find(|d| d.defense == name)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("bundle serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        serde_json::from_str(text).map_err(|e| ScenarioError::new("render", e.to_string()))
    }
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_owned(), |v| format!("{:.1}", 100.0 * v))
}

/// Human-readable text and the JSON summary of a bundle.
pub fn report_render(bundle: &ReportBundle) -> Result<(String, String), ScenarioError> {
    if bundle.is_empty() {
        return Err(ScenarioError::new("render", "report bundle is empty".into()));
    }
    let mut out = String::new();
    let _ = writeln!(out, "scenario {} (seed {})", bundle.scenario, bundle.seed);

    for t in &bundle.precision_tables {
        let _ = writeln!(out, "\n== {} ==", t.name);
        let _ = writeln!(out, "{:<16} {:>9} {:>8} {:>10}", "label", "predicted", "correct", "precision%");
        for p in &t.report.per_label {
            let _ = writeln!(
                out,
                "{:<16} {:>9} {:>8} {:>10}",
                p.label,
                p.predicted,
                p.correct,
                pct(p.precision)
            );
        }
        let _ = writeln!(out, "{:<16} {:>9} {:>8} {:>10}", "average", "", "", pct(Some(t.report.average)));
    }

    for s in &bundle.series {
        let _ = writeln!(out, "\n== {} ==", s.name);
        let _ = writeln!(out, "{:>10} {:>8}", s.x_label, "ASR%");
        for (x, y) in &s.points {
            let _ = writeln!(out, "{:>10} {:>8}", x, pct(Some(*y)));
        }
    }

    for t in &bundle.tables {
        let _ = writeln!(out, "\n== {} ==", t.title);
        let _ = write!(out, "{:<16}", "");
        for c in &t.columns {
            let _ = write!(out, " {c:>12}");
        }
        out.push('\n');
        for r in &t.rows {
            let _ = write!(out, "{:<16}", r.label);
            for v in &r.values {
                let _ = write!(out, " {:>12}", pct(*v));
            }
            out.push('\n');
        }
    }

    if !bundle.pearson.is_empty() {
        let _ = writeln!(out, "\n== timing recovery ==");
        let _ = writeln!(
            out,
            "{:<12} {:>12} {:>12} {:>10} {:>8}",
            "strategy", "r(dur,n)", "r(est,n)", "MAE tok", "clamped"
        );
        for p in &bundle.pearson {
            let _ = writeln!(
                out,
                "{:<12} {:>12.6} {:>12.6} {:>10.3} {:>8}",
                p.name, p.duration_tokens, p.estimate_tokens, p.mean_abs_token_error, p.clamped
            );
        }
    }

    if !bundle.defenses.is_empty() {
        let _ = writeln!(out, "\n== defenses ==");
        let _ = writeln!(
            out,
            "{:<28} {:>8} {:>8} {:>10} {:>10}",
            "defense", "pre%", "post%", "latency%", "bytes%"
        );
        for d in &bundle.defenses {
            let _ = writeln!(
                out,
                "{:<28} {:>8} {:>8} {:>10} {:>10}",
                d.defense,
                pct(Some(d.pre_asr)),
                pct(Some(d.post_asr)),
                pct(d.latency_penalty),
                pct(d.byte_padding)
            );
        }
    }
    Ok((out, bundle.to_json()))
}
