//! Subtopic-level controversy measurement over repost networks.
//!
//! Records are filtered per time window and subtopic, turned into an
//! endorsement graph, split into two balanced sides and scored with a
//! random-walk controversy measure. Sentiment summaries and correlation
//! helpers sit alongside.

pub mod bipartition;
pub mod controversy;
pub mod error;
pub mod graph;
pub mod ingest;
pub mod pipeline;
pub mod report;
pub mod sentiment;
pub mod stats;
pub mod subtopic;
pub mod synth;

pub use bipartition::{bisect, cut_size, Bipartition, CutSize, Side};
pub use controversy::{rwc_monte_carlo, rwc_score, McEstimate, RwcConfig, RwcResult};
pub use error::{Error, Result};
pub use graph::{
    build_graph, k_core, largest_component, prepare_conversation_graph, EndorsementGraph, GraphParams,
    PreparedGraph,
};
pub use ingest::{filter_window, parse_records, read_records, InteractionRecord, RepostRef, TimeWindow, Token};
pub use pipeline::{run_pipeline, Phase1Scope, Pipeline, PipelineConfig};
pub use report::{emit_report, ControversyReport, ReportFormat};
pub use sentiment::{aggregate_sentiment, score_text, PolarityLexicon, SentimentSummary};
pub use stats::{classify_subtopics, pearson, Correlation, Thresholds};
pub use subtopic::{extract_candidate_tokens, top_n_subtopics, CountMode, StopwordConfig};
