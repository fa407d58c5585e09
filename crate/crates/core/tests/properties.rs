use std::collections::HashMap;

use controversy_scope::bipartition::{bisect, cut_size, Bipartition, Side, DEFAULT_BALANCE_EPS};
use controversy_scope::controversy::{rwc_score, RwcConfig};
use controversy_scope::graph::{largest_component, EndorsementGraph, GraphParams};
use controversy_scope::ingest::TimeWindow;
use controversy_scope::pipeline::{run_pipeline, Pipeline, PipelineConfig, ALL_LABEL};
use controversy_scope::stats::pearson;
use controversy_scope::synth::{
    planted_partition, synth_corpus, CommunitySpec, CorpusSpec, CountRange, PlantedSpec,
    SentimentVocabulary,
};
use proptest::prelude::*;

fn clique_pair(m: usize, bridges: usize) -> EndorsementGraph {
    let mut edges = Vec::new();
    for side in ['a', 'b'] {
        for i in 0..m {
            for j in i + 1..m {
                edges.push((format!("{side}{i:02}"), format!("{side}{j:02}"), 1));
            }
        }
    }
    for i in 0..bridges {
        edges.push((format!("a{i:02}"), format!("b{i:02}"), 1));
    }
    EndorsementGraph::from_edges(edges)
}

#[test]
fn planted_cliques_recovered_for_every_bridge_count() {
    for m in [4, 5, 7, 10, 16] {
        for b in 1..m {
            let g = clique_pair(m, b);
            let p = bisect(&g, DEFAULT_BALANCE_EPS, 3).unwrap();
            assert_eq!(p.cut, b, "m={m} b={b}");
            let a_side = p.side(g.index_of("a00").unwrap());
            for (u, id) in g.ids().iter().enumerate() {
                assert_eq!(p.side(u) == a_side, id.starts_with('a'), "m={m} b={b} node {id}");
            }
        }
    }
}

#[test]
fn relabeling_maps_bisect_output() {
    for seed in 0..5 {
        let pg = planted_partition(&PlantedSpec { n_per_side: 80, p_in: 0.1, p_out: 0.01, seed }).unwrap();
        let g = pg.graph;
        // Order-preserving renaming keeps the canonical internal order.
        let rename = |id: &str| format!("user_{id}");
        let renamed = EndorsementGraph::from_edges(
            g.edges().map(|(u, v, w)| (rename(g.id(u)), rename(g.id(v)), w)),
        );
        let a = bisect(&g, DEFAULT_BALANCE_EPS, seed).unwrap();
        let b = bisect(&renamed, DEFAULT_BALANCE_EPS, seed).unwrap();
        for (u, id) in g.ids().iter().enumerate() {
            assert_eq!(a.side(u), b.side(renamed.index_of(&rename(id)).unwrap()));
        }
        assert_eq!(a.cut, b.cut);
    }
}

#[test]
fn erdos_renyi_scores_low() {
    for seed in 0..10 {
        let pg = planted_partition(&PlantedSpec { n_per_side: 500, p_in: 0.01, p_out: 0.01, seed }).unwrap();
        let g = largest_component(&pg.graph);
        let p = bisect(&g, DEFAULT_BALANCE_EPS, seed).unwrap();
        let r = rwc_score(&g, &p, &RwcConfig::default()).unwrap();
        assert!(r.score.abs() < 0.15, "seed {seed}: {}", r.score);
        let swapped = rwc_score(&g, &p.swapped(), &RwcConfig::default()).unwrap();
        assert!((swapped.score - r.score).abs() < 1e-9);
    }
}

#[test]
fn two_fifty_cliques_score_high() {
    let pg = planted_partition(&PlantedSpec { n_per_side: 50, p_in: 1.0, p_out: 0.0, seed: 0 }).unwrap();
    let r = rwc_score(&pg.graph, &pg.truth, &RwcConfig::default()).unwrap();
    assert!(r.score > 0.85, "{r:?}");
}

#[test]
fn monotone_in_p_out_including_p_in() {
    let p_in = 0.03;
    let mut means = Vec::new();
    for p_out in [0.0005, 0.002, 0.01, p_in] {
        let mut total = 0.0;
        for seed in 0..5 {
            let g = planted_partition(&PlantedSpec { n_per_side: 200, p_in, p_out, seed }).unwrap().graph;
            let p = bisect(&g, DEFAULT_BALANCE_EPS, seed).unwrap();
            total += rwc_score(&g, &p, &RwcConfig::default()).unwrap().score;
        }
        means.push(total / 5.0);
    }
    assert!(means.windows(2).all(|w| w[1] <= w[0]), "{means:?}");
}

fn community(authors: usize, bias: f64) -> CommunitySpec {
    CommunitySpec { authors, topic_tokens: vec!["vaxx".into()], polarity_bias: bias }
}

fn corpus_spec(communities: Vec<CommunitySpec>, seed: u64) -> CorpusSpec {
    CorpusSpec {
        communities,
        background_tokens: vec!["weather".into()],
        cross_repost_rate: 0.02,
        background_cross_rate: 0.5,
        topic_share: 0.5,
        window: TimeWindow::new(1_593_561_600, 1_596_240_000, "2020-07").unwrap(),
        posts_per_author: CountRange { min: 3, max: 6 },
        reposts_per_author: CountRange { min: 30, max: 50 },
        favorites: 10,
        sentiment_tokens: SentimentVocabulary::default(),
        seed,
    }
}

fn rq1(queries: &[&str]) -> PipelineConfig {
    PipelineConfig {
        queries: Some(queries.iter().map(|q| q.to_string()).collect()),
        seed: 11,
        ..PipelineConfig::default()
    }
}

#[test]
fn one_community_topic_is_not_controversial() {
    for seed in 0..5 {
        let corpus = synth_corpus(&corpus_spec(vec![community(1000, 0.0)], seed)).unwrap();
        let reports = Pipeline::new(rq1(&["vaxx"])).unwrap().run(&corpus.records).unwrap();
        assert_eq!(reports.len(), 1);
        let score = reports[0].score().unwrap_or_else(|| panic!("unscored: {:?}", reports[0]));
        assert!(score.abs() < 0.15, "seed {seed}: {score}");
    }
}

#[test]
fn rq1_rows_dashes_and_agreement_with_shortlist() {
    let mut spec = corpus_spec(vec![community(500, 0.6), community(500, -0.6)], 21);
    // Second month with little activity: every cell there is undersized.
    spec.window = TimeWindow::new(1_593_561_600, 1_596_240_000, "2020-07").unwrap();
    let mut records = synth_corpus(&spec).unwrap().records;
    let mut quiet = synth_corpus(&CorpusSpec {
        window: TimeWindow::new(1_596_240_000, 1_598_918_400, "2020-08").unwrap(),
        communities: vec![community(20, 0.0)],
        ..spec.clone()
    })
    .unwrap()
    .records;
    for r in &mut quiet {
        r.post_id = format!("q{}", r.post_id);
        if let Some(orig) = &mut r.repost_of {
            orig.post_id = format!("q{}", orig.post_id);
        }
    }
    records.append(&mut quiet);

    let queries = ["vaxx", "weather", "absent"];
    let mut cfg = rq1(&queries);
    cfg.include_all = true;
    let reports = Pipeline::new(cfg).unwrap().run(&records).unwrap();
    let keys: Vec<(&str, &str)> = reports.iter().map(|r| (r.window.as_str(), r.subtopic.as_str())).collect();
    assert_eq!(
        keys,
        [
            ("2020-07", "vaxx"),
            ("2020-07", "weather"),
            ("2020-07", "absent"),
            ("2020-07", ALL_LABEL),
            ("2020-08", "vaxx"),
            ("2020-08", "weather"),
            ("2020-08", "absent"),
            ("2020-08", ALL_LABEL),
        ]
    );
    let min_nodes = GraphParams::default().min_nodes;
    for r in &reports {
        assert!(r.error.is_none(), "{r:?}");
        assert_eq!(r.rwc.is_some(), r.node_count >= min_nodes, "{r:?}");
    }
    assert!(reports[0].score().unwrap() > 0.3);
    assert!(reports[4..].iter().all(|r| r.rwc.is_none()));
    assert_eq!(reports[2].record_count, 0);

    // Phase-1 mode finds the same tokens and gives the same scores.
    let shortlist = Pipeline::new(PipelineConfig { seed: 11, ..PipelineConfig::default() })
        .unwrap()
        .run(&records)
        .unwrap();
    let by_key: HashMap<(&str, &str), Option<f64>> =
        shortlist.iter().map(|r| ((r.window.as_str(), r.subtopic.as_str()), r.score())).collect();
    for r in &reports[..2] {
        assert_eq!(by_key[&(r.window.as_str(), r.subtopic.as_str())], r.score());
    }
    // One report per shortlisted subtopic and window.
    let mut seen = std::collections::HashSet::new();
    assert!(shortlist.iter().all(|r| seen.insert((r.window.clone(), r.subtopic.clone()))));
}

#[test]
fn empty_input_file_gives_empty_report_list() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("empty.jsonl");
    std::fs::write(&input, "\n\n").unwrap();
    let reports = run_pipeline(&PipelineConfig { input: Some(input.clone()), ..PipelineConfig::default() }).unwrap();
    assert!(reports.is_empty());
    std::fs::write(&input, "{\"post_id\": \"\"}\n").unwrap();
    assert!(run_pipeline(&PipelineConfig { input: Some(input), ..PipelineConfig::default() }).is_err());
}

#[test]
fn cut_size_matches_edge_scan() {
    let pg = planted_partition(&PlantedSpec { n_per_side: 5, p_in: 0.6, p_out: 0.4, seed: 2 }).unwrap();
    let g = pg.graph;
    for mask in 1u32..(1 << 10) - 1 {
        let sides: Vec<Side> = (0..10).map(|u| if mask >> u & 1 == 1 { Side::Y } else { Side::X }).collect();
        let p = Bipartition::from_sides(&g, sides.clone()).unwrap();
        let scan = g.edges().filter(|&(u, v, _)| sides[u] != sides[v]).count();
        assert_eq!(cut_size(&g, &p).unwrap().edges, scan);
    }
}

proptest! {
    #[test]
    fn pearson_symmetry_and_affine_invariance(
        pairs in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..40),
        a in 0.1f64..10.0,
        b in -50.0f64..50.0,
    ) {
        let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let Ok(base) = pearson(&xs, &ys) else { return Ok(()) };
        let flipped = pearson(&ys, &xs).unwrap();
        prop_assert!((base.r - flipped.r).abs() < 1e-12);
        let moved: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
        let affine = pearson(&moved, &ys).unwrap();
        prop_assert!((base.r - affine.r).abs() < 1e-9);
        let negated: Vec<f64> = ys.iter().map(|y| -y).collect();
        let neg = pearson(&xs, &negated).unwrap();
        prop_assert!((base.r + neg.r).abs() < 1e-12);
        prop_assert!((base.p - neg.p).abs() < 1e-12);
    }
}
