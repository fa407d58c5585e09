use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use controversy_scope::graph::build_graph;
use controversy_scope::ingest::write_records;
use controversy_scope::pipeline::{Phase1Scope, Pipeline, PipelineConfig};
use controversy_scope::report::{emit_report, ControversyReport, ReportFormat};
use controversy_scope::subtopic::CountMode;
use controversy_scope::synth::{planted_partition, synth_corpus, CorpusSpec, PlantedSpec};
use controversy_scope::{read_records, Error};
use serde::Deserialize;

#[derive(Parser)]
#[command(name = "controversy-scope", version, about = "Score controversy of subtopics in repost networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Shortlist frequent subtopics per window and score each of them.
    Run {
        #[command(flatten)]
        opts: PipelineArgs,
    },
    /// Score a fixed, comma-separated list of subtopics.
    Rq1 {
        #[arg(long, value_delimiter = ',', required = true)]
        queries: Vec<String>,
        /// Add a row scored over all records of each window.
        #[arg(long)]
        include_all: bool,
        #[command(flatten)]
        opts: PipelineArgs,
    },
    /// Generate a synthetic corpus or planted-partition graph.
    Synth {
        /// JSON corpus spec or planted-partition spec.
        #[arg(long)]
        spec: PathBuf,
        /// JSONL records for a corpus spec, edge list for a planted spec.
        #[arg(long)]
        output: PathBuf,
        /// Corpus only: also write the repost graph as an edge list.
        #[arg(long)]
        edges: Option<PathBuf>,
        /// Planted only: write the ground-truth sides.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
}

/// Values given here override the config file.
#[derive(Args)]
struct PipelineArgs {
    /// JSON file with pipeline settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// JSONL interaction records.
    #[arg(long)]
    input: Option<PathBuf>,
    /// IANA timezone for month windows.
    #[arg(long)]
    tz: Option<String>,
    /// `YYYY-MM` or `start..end`; repeatable.
    #[arg(long = "window")]
    windows: Vec<String>,
    #[arg(long)]
    top_n: Option<usize>,
    /// Custom stopword list; repeatable.
    #[arg(long)]
    stopwords: Vec<PathBuf>,
    /// Standard stopword list; repeatable.
    #[arg(long)]
    standard_stopwords: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    noun_tags: Vec<String>,
    /// `occurrences` or `documents`.
    #[arg(long)]
    count_mode: Option<CountMode>,
    /// `window` or `global`.
    #[arg(long)]
    phase1_scope: Option<Phase1Scope>,
    #[arg(long)]
    min_rt: Option<u32>,
    #[arg(long)]
    k_core: Option<usize>,
    #[arg(long)]
    min_nodes: Option<usize>,
    #[arg(long)]
    balance_eps: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    k_top: Option<usize>,
    /// Restart probability of the walks.
    #[arg(long)]
    restart: Option<f64>,
    /// Walk along edges in proportion to their weight.
    #[arg(long)]
    weighted: bool,
    #[arg(long)]
    mc_walks: Option<u64>,
    /// Cross-check every score with Monte Carlo walks.
    #[arg(long)]
    mc_check: bool,
    /// Tab-separated `surface polarity` lexicon.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long)]
    score_thresh: Option<f64>,
    #[arg(long)]
    size_thresh: Option<usize>,
    #[arg(long)]
    senti_thresh: Option<f64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Write each scored graph and its partition into this directory.
    #[arg(long)]
    dump_graphs: Option<PathBuf>,
    /// `csv`, `json` or `markdown`.
    #[arg(long)]
    format: Option<ReportFormat>,
    /// Report path; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

impl PipelineArgs {
    fn into_config(self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::read(path)?,
            None => PipelineConfig::default(),
        };
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = self.$field { $target = v; })*
            };
        }
        set! {
            tz => cfg.timezone,
            top_n => cfg.top_n,
            count_mode => cfg.count_mode,
            phase1_scope => cfg.phase1_scope,
            min_rt => cfg.graph.min_rt,
            k_core => cfg.graph.k_core,
            min_nodes => cfg.graph.min_nodes,
            balance_eps => cfg.balance_eps,
            seed => cfg.seed,
            k_top => cfg.rwc.k_top,
            restart => cfg.rwc.restart_prob,
            mc_walks => cfg.mc_walks,
            score_thresh => cfg.thresholds.score,
            size_thresh => cfg.thresholds.size,
            senti_thresh => cfg.thresholds.sentiment,
            format => cfg.format,
        }
        for (value, target) in [
            (self.input, &mut cfg.input),
            (self.lexicon, &mut cfg.lexicon),
            (self.dump_graphs, &mut cfg.dump_graphs),
            (self.output, &mut cfg.output),
        ] {
            if value.is_some() {
                *target = value;
            }
        }
        if self.workers.is_some() {
            cfg.workers = self.workers;
        }
        if !self.windows.is_empty() {
            cfg.windows = self.windows;
        }
        if !self.stopwords.is_empty() {
            cfg.stopwords = self.stopwords;
        }
        if !self.standard_stopwords.is_empty() {
            cfg.standard_stopwords = self.standard_stopwords;
        }
        if !self.noun_tags.is_empty() {
            cfg.noun_tags = self.noun_tags;
        }
        cfg.rwc.weighted |= self.weighted;
        cfg.mc_check |= self.mc_check;
        if cfg.input.is_none() {
            bail!("no input: pass --input or set \"input\" in the config");
        }
        Ok(cfg)
    }
}

/// Write through a sibling temporary file so readers never see a partial file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn run_batch(cfg: PipelineConfig) -> Result<()> {
    let input = cfg.input.clone().expect("checked in into_config");
    let pipeline = Pipeline::new(cfg)?;
    let records = match read_records(&input) {
        Ok(parsed) => {
            if parsed.malformed > 0 {
                eprintln!("skipped {} malformed line(s)", parsed.malformed);
            }
            parsed.records
        }
        Err(Error::EmptyInput { malformed: 0 }) => Vec::new(),
        Err(e) => return Err(e).with_context(|| format!("reading {}", input.display())),
    };
    let reports = pipeline.run(&records)?;
    let cfg = pipeline.config();
    let bytes = emit_report(&reports, cfg.format, &cfg.thresholds)?;
    match &cfg.output {
        Some(path) => write_atomic(path, &bytes)?,
        None => std::io::stdout().lock().write_all(&bytes)?,
    }
    eprintln!("{}", summary(&reports));
    Ok(())
}

fn summary(reports: &[ControversyReport]) -> String {
    let scored = reports.iter().filter(|r| r.rwc.is_some()).count();
    let failed = reports.iter().filter(|r| r.error.is_some()).count();
    format!(
        "{} cells: {scored} scored, {} undersized, {failed} failed",
        reports.len(),
        reports.len() - scored - failed
    )
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SynthSpec {
    Corpus(CorpusSpec),
    Planted(PlantedSpec),
}

fn run_synth(spec: &Path, output: &Path, edges: Option<&Path>, truth: Option<&Path>) -> Result<()> {
    let text = std::fs::read_to_string(spec).with_context(|| format!("reading {}", spec.display()))?;
    let spec: SynthSpec =
        serde_json::from_str(&text).context("spec is neither a corpus spec nor a planted-partition spec")?;
    match spec {
        SynthSpec::Corpus(spec) => {
            if truth.is_some() {
                bail!("--truth applies to planted-partition specs");
            }
            let corpus = synth_corpus(&spec)?;
            let mut bytes = Vec::new();
            write_records(&mut bytes, &corpus.records)?;
            write_atomic(output, &bytes)?;
            if let Some(path) = edges {
                write_atomic(path, build_graph(&corpus.records, 1).to_edge_list().as_bytes())?;
            }
            eprintln!("{} records from {} authors", corpus.records.len(), corpus.authors.len());
        }
        SynthSpec::Planted(spec) => {
            if edges.is_some() {
                bail!("--edges applies to corpus specs; the planted graph goes to --output");
            }
            let pg = planted_partition(&spec)?;
            write_atomic(output, pg.graph.to_edge_list().as_bytes())?;
            if let Some(path) = truth {
                write_atomic(path, pg.truth.to_dump(&pg.graph).as_bytes())?;
            }
            eprintln!(
                "{} nodes, {} edges, {} bridge(s)",
                pg.graph.node_count(),
                pg.graph.edge_count(),
                pg.bridges.len()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let result = match Cli::parse().command {
        Command::Run { opts } => opts.into_config().and_then(run_batch),
        Command::Rq1 { queries, include_all, opts } => opts.into_config().and_then(|mut cfg| {
            cfg.queries = Some(queries);
            cfg.include_all |= include_all;
            run_batch(cfg)
        }),
        Command::Synth { spec, output, edges, truth } => {
            run_synth(&spec, &output, edges.as_deref(), truth.as_deref())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
