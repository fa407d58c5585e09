//! Per-cell reports and their CSV, JSON and markdown-table renderings.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::controversy::RwcResult;
use crate::error::{Error, Result};
use crate::sentiment::SentimentSummary;
use crate::stats::Thresholds;

/// Outcome for one `(subtopic, window)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControversyReport {
    pub subtopic: String,
    pub window: String,
    /// Records matched by the subtopic query in the window.
    pub record_count: usize,
    /// Nodes of the prepared graph (after k-core and largest component).
    pub node_count: usize,
    /// Present only when the graph reached the minimum size and scoring
    /// succeeded.
    pub rwc: Option<RwcResult>,
    /// Absent when no record matched the lexicon or no lexicon was given.
    pub sentiment: Option<SentimentSummary>,
    /// Per-cell failure, kept as data so the batch completes.
    pub error: Option<String>,
}

impl ControversyReport {
    pub fn score(&self) -> Option<f64> {
        self.rwc.map(|r| r.score)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "markdown" | "markdown-table" | "md" => Ok(ReportFormat::Markdown),
            other => Err(Error::UnsupportedFormat(other.to_string())),
        }
    }
}

pub const CSV_HEADER: [&str; 17] = [
    "subtopic",
    "window",
    "record_count",
    "node_count",
    "rwc",
    "p_xx",
    "p_xy",
    "p_yy",
    "p_yx",
    "sentiment_mean",
    "sentiment_std",
    "sentiment_matched",
    "undersized",
    "high_controversy",
    "large",
    "low_sentiment",
    "error",
];

pub fn emit_report(reports: &[ControversyReport], format: ReportFormat, t: &Thresholds) -> Result<Vec<u8>> {
    match format {
        ReportFormat::Csv => emit_csv(reports, t),
        ReportFormat::Json => emit_json(reports, t),
        ReportFormat::Markdown => Ok(emit_markdown(reports, t).into_bytes()),
    }
}

/// Format given by name; unknown names fail with `UnsupportedFormat`.
pub fn emit_report_named(reports: &[ControversyReport], format: &str, t: &Thresholds) -> Result<Vec<u8>> {
    emit_report(reports, format.parse()?, t)
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn emit_csv(reports: &[ControversyReport], t: &Thresholds) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in reports {
        let rwc = r.rwc.as_ref();
        let senti = r.sentiment.as_ref();
        w.write_record([
            r.subtopic.clone(),
            r.window.clone(),
            r.record_count.to_string(),
            r.node_count.to_string(),
            opt(rwc.map(|x| x.score)),
            opt(rwc.map(|x| x.p_xx)),
            opt(rwc.map(|x| x.p_xy)),
            opt(rwc.map(|x| x.p_yy)),
            opt(rwc.map(|x| x.p_yx)),
            opt(senti.map(|s| s.mean)),
            opt(senti.map(|s| s.std)),
            opt(senti.map(|s| s.matched_count)),
            (rwc.is_none() && r.error.is_none()).to_string(),
            rwc.is_some_and(|x| t.is_high(x.score)).to_string(),
            t.is_large(r.node_count).to_string(),
            senti.is_some_and(|s| t.is_negative(s.mean)).to_string(),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Parse(e.to_string()))
}

/// Read reports back from [`emit_report`]'s CSV. Flag columns are derived
/// data and are not read.
pub fn parse_csv_reports(bytes: &[u8]) -> Result<Vec<ControversyReport>> {
    let mut rd = csv::Reader::from_reader(bytes);
    let headers = rd.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    if headers.iter().ne(CSV_HEADER) {
        return Err(Error::Parse(format!("unexpected report header {headers:?}")));
    }
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row.map_err(|e| Error::Parse(e.to_string()))?;
        let field = |i: usize| row.get(i).unwrap_or("");
        let num = |i: usize| -> Result<Option<f64>> {
            let s = field(i);
            if s.is_empty() {
                return Ok(None);
            }
            s.parse()
                .map(Some)
                .map_err(|_| Error::Parse(format!("bad number {s:?} in column {}", CSV_HEADER[i])))
        };
        let int = |i: usize| -> Result<usize> {
            field(i)
                .parse()
                .map_err(|_| Error::Parse(format!("bad integer in column {}", CSV_HEADER[i])))
        };
        let rwc = match (num(4)?, num(5)?, num(6)?, num(7)?, num(8)?) {
            (Some(score), Some(p_xx), Some(p_xy), Some(p_yy), Some(p_yx)) => Some(RwcResult {
                p_xx,
                p_xy,
                p_yy,
                p_yx,
                score,
            }),
            _ => None,
        };
        let sentiment = match (num(9)?, num(10)?) {
            (Some(mean), Some(std)) => Some(SentimentSummary {
                mean,
                std,
                matched_count: int(11)?,
            }),
            _ => None,
        };
        out.push(ControversyReport {
            subtopic: field(0).to_string(),
            window: field(1).to_string(),
            record_count: int(2)?,
            node_count: int(3)?,
            rwc,
            sentiment,
            error: Some(field(16).to_string()).filter(|s| !s.is_empty()),
        });
    }
    Ok(out)
}

#[derive(Serialize)]
struct JsonRow<'a> {
    #[serde(flatten)]
    report: &'a ControversyReport,
    undersized: bool,
    high_controversy: bool,
    large: bool,
    low_sentiment: bool,
}

fn emit_json(reports: &[ControversyReport], t: &Thresholds) -> Result<Vec<u8>> {
    let rows: Vec<JsonRow> = reports
        .iter()
        .map(|r| JsonRow {
            report: r,
            undersized: r.rwc.is_none() && r.error.is_none(),
            high_controversy: r.score().is_some_and(|s| t.is_high(s)),
            large: t.is_large(r.node_count),
            low_sentiment: r.sentiment.is_some_and(|s| t.is_negative(s.mean)),
        })
        .collect();
    let mut bytes = serde_json::to_vec_pretty(&rows).map_err(|e| Error::Parse(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Subtopics down, windows across, scores to three decimals. Scores above
/// the controversy threshold are bold; cells without a score are dashes.
fn emit_markdown(reports: &[ControversyReport], t: &Thresholds) -> String {
    let mut windows: Vec<&str> = Vec::new();
    let mut subtopics: Vec<&str> = Vec::new();
    for r in reports {
        if !windows.contains(&r.window.as_str()) {
            windows.push(&r.window);
        }
        if !subtopics.contains(&r.subtopic.as_str()) {
            subtopics.push(&r.subtopic);
        }
    }
    let mut out = String::from("| Subtopic |");
    for w in &windows {
        let _ = write!(out, " {w} |");
    }
    out.push_str("\n|---|");
    for _ in &windows {
        out.push_str("---:|");
    }
    out.push('\n');
    for s in &subtopics {
        let _ = write!(out, "| {s} |");
        for w in &windows {
            let cell = reports
                .iter()
                .find(|r| r.subtopic == *s && r.window == *w)
                .map(|r| markdown_cell(r, t))
                .unwrap_or_default();
            let _ = write!(out, " {cell} |");
        }
        out.push('\n');
    }
    out
}

fn markdown_cell(r: &ControversyReport, t: &Thresholds) -> String {
    match r.score() {
        Some(s) if t.is_high(s) => format!("**{s:.3}**"),
        Some(s) => format!("{s:.3}"),
        None => "-".to_string(),
    }
}
