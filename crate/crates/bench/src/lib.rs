//! Fixtures shared by the benchmarks.

use controversy_scope::bipartition::{bisect, Bipartition, DEFAULT_BALANCE_EPS};
use controversy_scope::graph::EndorsementGraph;
use controversy_scope::ingest::{InteractionRecord, TimeWindow};
use controversy_scope::synth::{
    planted_partition, synth_corpus, CommunitySpec, CorpusSpec, CountRange, PlantedSpec,
    SentimentVocabulary,
};

/// Two blocks of `n_per_side` nodes with average degree near 10.
pub fn planted_graph(n_per_side: usize, seed: u64) -> EndorsementGraph {
    let p_in = 9.0 / n_per_side as f64;
    planted_partition(&PlantedSpec { n_per_side, p_in, p_out: p_in / 20.0, seed })
        .expect("valid planted spec")
        .graph
}

pub fn planted_with_partition(n_per_side: usize, seed: u64) -> (EndorsementGraph, Bipartition) {
    let g = planted_graph(n_per_side, seed);
    let p = bisect(&g, DEFAULT_BALANCE_EPS, seed).expect("connected graph");
    (g, p)
}

/// Two polarized communities sharing the topic token `vaxx`.
pub fn two_community_corpus(authors_per_side: usize, seed: u64) -> Vec<InteractionRecord> {
    let community = |bias| CommunitySpec { authors: authors_per_side, topic_tokens: vec!["vaxx".into()], polarity_bias: bias };
    let spec = CorpusSpec {
        communities: vec![community(0.6), community(-0.6)],
        background_tokens: vec!["weather".into()],
        cross_repost_rate: 0.02,
        background_cross_rate: 0.5,
        topic_share: 0.5,
        window: TimeWindow::new(1_593_561_600, 1_596_240_000, "2020-07").expect("window"),
        posts_per_author: CountRange { min: 3, max: 6 },
        reposts_per_author: CountRange { min: 30, max: 50 },
        favorites: 10,
        sentiment_tokens: SentimentVocabulary::default(),
        seed,
    };
    synth_corpus(&spec).expect("valid corpus spec").records
}
