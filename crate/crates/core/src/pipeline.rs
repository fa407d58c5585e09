//! End-to-end batch: per window, shortlist subtopics (or take a fixed query
//! list), then for every `(subtopic, window)` cell filter records, prepare the
//! endorsement graph, bisect it, score it and summarize sentiment.

use std::path::{Path, PathBuf};

use chrono_tz::Tz;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bipartition::{bisect, DEFAULT_BALANCE_EPS, MAX_BALANCE_EPS};
use crate::controversy::{rwc_monte_carlo, rwc_score, RwcConfig, RwcResult};
use crate::error::{Error, Result};
use crate::graph::{prepare_conversation_graph, EndorsementGraph, GraphParams, PreparedGraph};
use crate::ingest::{filter_window, monthly_windows, parse_timezone, read_records, InteractionRecord, TimeWindow};
use crate::report::{ControversyReport, ReportFormat};
use crate::sentiment::{aggregate_sentiment, PolarityLexicon};
use crate::stats::Thresholds;
use crate::subtopic::{
    extract_candidate_tokens_with, read_stopword_file, top_n_subtopics, CountMode, StopwordConfig,
    DEFAULT_TOP_N,
};

/// Largest allowed gap between the exact score and the Monte Carlo check.
pub const MC_TOLERANCE: f64 = 0.02;

/// Label of the reference row scored without a query.
pub const ALL_LABEL: &str = "ALL";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase1Scope {
    /// Shortlist computed separately inside each window.
    #[default]
    Window,
    /// One shortlist from the whole corpus, applied to every window.
    Global,
}

impl std::str::FromStr for Phase1Scope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "window" => Ok(Phase1Scope::Window),
            "global" => Ok(Phase1Scope::Global),
            other => Err(Error::Config(format!("unknown phase-1 scope {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: Option<PathBuf>,
    /// IANA name; month windows start at local midnight here.
    pub timezone: String,
    /// `YYYY-MM` or `start..end`; empty means every month present in the data.
    pub windows: Vec<String>,
    pub top_n: usize,
    pub count_mode: CountMode,
    pub phase1_scope: Phase1Scope,
    pub standard_stopwords: Vec<PathBuf>,
    pub stopwords: Vec<PathBuf>,
    pub noun_tags: Vec<String>,
    /// Fixed subtopics; skips the frequency shortlist.
    pub queries: Option<Vec<String>>,
    /// Also score each window with no query, as an `ALL` row.
    pub include_all: bool,
    pub graph: GraphParams,
    pub balance_eps: f64,
    pub rwc: RwcConfig,
    /// Run the Monte Carlo estimator next to the solver and fail the cell on
    /// disagreement above [`MC_TOLERANCE`].
    pub mc_check: bool,
    pub mc_walks: u64,
    pub lexicon: Option<PathBuf>,
    pub thresholds: Thresholds,
    pub seed: u64,
    /// Worker threads for cell computations; default is rayon's.
    pub workers: Option<usize>,
    /// Directory for per-cell edge-list and partition dumps.
    pub dump_graphs: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub format: ReportFormat,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            input: None,
            timezone: "UTC".into(),
            windows: Vec::new(),
            top_n: DEFAULT_TOP_N,
            count_mode: CountMode::Occurrences,
            phase1_scope: Phase1Scope::Window,
            standard_stopwords: Vec::new(),
            stopwords: Vec::new(),
            noun_tags: vec!["NOUN".into()],
            queries: None,
            include_all: false,
            graph: GraphParams::default(),
            balance_eps: DEFAULT_BALANCE_EPS,
            rwc: RwcConfig::default(),
            mc_check: false,
            mc_walks: 100_000,
            lexicon: None,
            thresholds: Thresholds::default(),
            seed: 0,
            workers: None,
            dump_graphs: None,
            output: None,
            format: ReportFormat::Csv,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Relative paths inside the file are taken relative to its directory.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        if let Some(base) = path.parent() {
            cfg.rebase(base);
        }
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.input.iter_mut().for_each(fix);
        self.lexicon.iter_mut().for_each(fix);
        self.dump_graphs.iter_mut().for_each(fix);
        self.output.iter_mut().for_each(fix);
        self.standard_stopwords.iter_mut().for_each(fix);
        self.stopwords.iter_mut().for_each(fix);
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.top_n == 0 {
            return fail("top_n must be at least 1".into());
        }
        if self.graph.min_rt == 0 || self.graph.k_core == 0 {
            return fail("min_rt and k_core must be at least 1".into());
        }
        if !(0.0..=MAX_BALANCE_EPS).contains(&self.balance_eps) {
            return fail(format!("balance_eps must lie in [0, {MAX_BALANCE_EPS}]"));
        }
        if self.noun_tags.is_empty() {
            return fail("noun_tags must not be empty".into());
        }
        if self.mc_check && self.mc_walks == 0 {
            return fail("mc_walks must be positive when mc_check is set".into());
        }
        if self.workers == Some(0) {
            return fail("workers must be positive".into());
        }
        if let Some(q) = &self.queries {
            if q.iter().any(|s| s.is_empty() || s.contains(char::is_whitespace)) {
                return fail("queries must be single non-empty tokens".into());
            }
        }
        self.rwc.validate()?;
        let files = self
            .input
            .iter()
            .chain(&self.standard_stopwords)
            .chain(&self.stopwords)
            .chain(&self.lexicon);
        for f in files {
            if !f.is_file() {
                return Err(Error::io(f, "no such file"));
            }
        }
        Ok(())
    }
}

/// A validated configuration with its side files loaded.
pub struct Pipeline {
    cfg: PipelineConfig,
    tz: Tz,
    windows: Option<Vec<TimeWindow>>,
    stopwords: StopwordConfig,
    lexicon: Option<PolarityLexicon>,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        let tz = parse_timezone(&cfg.timezone)?;
        let windows = if cfg.windows.is_empty() {
            None
        } else {
            Some(
                cfg.windows
                    .iter()
                    .map(|w| TimeWindow::parse(w, tz))
                    .collect::<Result<Vec<_>>>()?,
            )
        };
        let mut stopwords = StopwordConfig::new(cfg.noun_tags.iter().cloned());
        for p in &cfg.standard_stopwords {
            stopwords.standard.extend(read_stopword_file(p)?);
        }
        for p in &cfg.stopwords {
            stopwords.custom.extend(read_stopword_file(p)?);
        }
        stopwords.validate()?;
        let lexicon = cfg.lexicon.as_ref().map(PolarityLexicon::read).transpose()?;
        Ok(Pipeline {
            cfg,
            tz,
            windows,
            stopwords,
            lexicon,
        })
    }

    /// Replace the lexicon, e.g. with one built in memory.
    pub fn with_lexicon(mut self, lexicon: PolarityLexicon) -> Self {
        self.lexicon = Some(lexicon);
        self
    }

    pub fn with_stopwords(mut self, stopwords: StopwordConfig) -> Self {
        self.stopwords = stopwords;
        self
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    /// Windows to process: configured ones, else every month in the data.
    pub fn windows_for(&self, records: &[InteractionRecord]) -> Vec<TimeWindow> {
        self.windows
            .clone()
            .unwrap_or_else(|| monthly_windows(records, self.tz))
    }

    /// The shortlist for one window's records.
    pub fn shortlist<'a, I>(&self, records: I) -> Vec<String>
    where
        I: IntoIterator<Item = &'a InteractionRecord>,
    {
        let freq = extract_candidate_tokens_with(records, &self.stopwords, self.cfg.count_mode);
        top_n_subtopics(&freq, self.cfg.top_n)
    }

    /// One report per `(subtopic, window)`, ordered by window then by
    /// shortlist rank (or query order), with the `ALL` row last.
    pub fn run(&self, records: &[InteractionRecord]) -> Result<Vec<ControversyReport>> {
        let windows = self.windows_for(records);
        let in_window: Vec<Vec<&InteractionRecord>> = windows
            .iter()
            .map(|w| filter_window(records, w, None))
            .collect();
        let global = match (&self.cfg.queries, self.cfg.phase1_scope) {
            (None, Phase1Scope::Global) => Some(self.shortlist(records)),
            _ => None,
        };

        let mut cells: Vec<(usize, String, Option<String>)> = Vec::new();
        for (wi, recs) in in_window.iter().enumerate() {
            let subtopics = match (&self.cfg.queries, &global) {
                (Some(q), _) => q.clone(),
                (None, Some(g)) => g.clone(),
                (None, None) => self.shortlist(recs.iter().copied()),
            };
            for s in subtopics {
                cells.push((wi, s.clone(), Some(s)));
            }
            if self.cfg.include_all {
                cells.push((wi, ALL_LABEL.to_string(), None));
            }
        }

        let compute = || -> Vec<ControversyReport> {
            cells
                .par_iter()
                .map(|(wi, label, query)| {
                    self.score_cell(&in_window[*wi], &windows[*wi], label, query.as_deref())
                })
                .collect()
        };
        Ok(match self.cfg.workers {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(e.to_string()))?
                .install(compute),
            None => compute(),
        })
    }

    fn score_cell(
        &self,
        records: &[&InteractionRecord],
        window: &TimeWindow,
        label: &str,
        query: Option<&str>,
    ) -> ControversyReport {
        let matched = filter_window(records.iter().copied(), window, query);
        let sentiment = self
            .lexicon
            .as_ref()
            .and_then(|lex| aggregate_sentiment(matched.iter().copied(), lex).ok());
        let prepared = prepare_conversation_graph(matched.iter().copied(), &self.cfg.graph);
        let node_count = prepared.node_count();
        let (rwc, error) = match prepared {
            PreparedGraph::UnderSized(_) => (None, None),
            PreparedGraph::Ready(g) => match self.score_graph(&g, &window.label, label) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            },
        };
        ControversyReport {
            subtopic: label.to_string(),
            window: window.label.clone(),
            record_count: matched.len(),
            node_count,
            rwc,
            sentiment,
            error,
        }
    }

    fn score_graph(&self, g: &EndorsementGraph, window: &str, label: &str) -> Result<RwcResult> {
        let cfg = &self.cfg;
        let partition = bisect(g, cfg.balance_eps, cfg.seed)?;
        if let Some(dir) = &cfg.dump_graphs {
            let stem = dir.join(format!("{}_{}", file_safe(window), file_safe(label)));
            let edges = stem.with_extension("edges");
            let parts = stem.with_extension("parts");
            std::fs::write(&edges, g.to_edge_list()).map_err(|e| Error::io(&edges, e))?;
            std::fs::write(&parts, partition.to_dump(g)).map_err(|e| Error::io(&parts, e))?;
        }
        let exact = rwc_score(g, &partition, &cfg.rwc)?;
        if cfg.mc_check {
            let mc = rwc_monte_carlo(g, &partition, &cfg.rwc, cfg.mc_walks, cfg.seed)?;
            if (mc.result.score - exact.score).abs() > MC_TOLERANCE {
                return Err(Error::Config(format!(
                    "Monte Carlo check failed: exact {:.4}, estimate {:.4}",
                    exact.score, mc.result.score
                )));
            }
        }
        Ok(exact)
    }
}

fn file_safe(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

/// Load the configured input and run the batch. An input without a single
/// non-blank line yields no reports; one whose lines are all malformed fails.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<Vec<ControversyReport>> {
    let input = cfg
        .input
        .as_ref()
        .ok_or_else(|| Error::Config("input path is required".into()))?;
    let pipeline = Pipeline::new(cfg.clone())?;
    let records = match read_records(input) {
        Ok(parsed) => parsed.records,
        Err(Error::EmptyInput { malformed: 0 }) => Vec::new(),
        Err(e) => return Err(e),
    };
    pipeline.run(&records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_json_defaults_and_unknown_keys() {
        let cfg = PipelineConfig::from_json(r#"{"top_n": 5, "graph": {"min_rt": 2, "k_core": 2, "min_nodes": 10}}"#).unwrap();
        assert_eq!(cfg.top_n, 5);
        assert_eq!(cfg.graph.min_nodes, 10);
        assert_eq!(cfg.rwc, RwcConfig::default());
        assert_eq!(cfg.timezone, "UTC");
        assert!(PipelineConfig::from_json(r#"{"topn": 5}"#).is_err());
        let rq1 = PipelineConfig::from_json(r#"{"queries": ["vaccine"], "rwc": {"k_top": 3}, "format": "markdown"}"#).unwrap();
        assert_eq!(rq1.rwc.k_top, 3);
        assert_eq!(rq1.rwc.restart_prob, 0.15);
        assert_eq!(rq1.format, ReportFormat::Markdown);
    }

    #[test]
    fn config_validation() {
        let ok = PipelineConfig::default();
        ok.validate().unwrap();
        for bad in [
            PipelineConfig { top_n: 0, ..ok.clone() },
            PipelineConfig { balance_eps: 0.2, ..ok.clone() },
            PipelineConfig { queries: Some(vec!["two words".into()]), ..ok.clone() },
            PipelineConfig { lexicon: Some("/nonexistent/lexicon.tsv".into()), ..ok.clone() },
            PipelineConfig { workers: Some(0), ..ok.clone() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config(_) | Error::Io { .. })), "{bad:?}");
        }
        assert!(matches!(
            Pipeline::new(PipelineConfig { timezone: "Nowhere/City".into(), ..ok }),
            Err(Error::UnknownTimezone(_))
        ));
    }

    #[test]
    fn empty_corpus_gives_no_reports() {
        let p = Pipeline::new(PipelineConfig::default()).unwrap();
        assert!(p.run(&[]).unwrap().is_empty());
    }

    #[test]
    fn config_file_paths_are_relative_to_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, r#"{"input": "in.jsonl", "stopwords": ["/abs/list.txt", "rel.txt"]}"#).unwrap();
        let cfg = PipelineConfig::read(&path).unwrap();
        assert_eq!(cfg.input, Some(dir.path().join("in.jsonl")));
        assert_eq!(cfg.stopwords, [PathBuf::from("/abs/list.txt"), dir.path().join("rel.txt")]);
    }

    #[test]
    fn file_names_are_sanitized() {
        assert_eq!(file_safe("2020-02..x/y"), "2020-02__x_y");
    }
}
