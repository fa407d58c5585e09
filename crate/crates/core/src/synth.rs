//! Synthetic validation data: planted two-block graphs and repost corpora
//! with planted community structure.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bipartition::{Bipartition, Side};
use crate::error::{Error, Result};
use crate::graph::{connected_components, EndorsementGraph};
use crate::ingest::{InteractionRecord, RepostRef, TimeWindow, Token};

/// Weight given to every generated edge; passes the default repost threshold.
pub const PLANTED_EDGE_WEIGHT: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantedSpec {
    pub n_per_side: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub seed: u64,
}

impl PlantedSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_per_side < 2 {
            return Err(Error::Config("n_per_side must be at least 2".into()));
        }
        if !(0.0 <= self.p_out && self.p_out <= self.p_in && self.p_in <= 1.0) {
            return Err(Error::Config(format!(
                "need 0 <= p_out <= p_in <= 1, got p_in={} p_out={}",
                self.p_in, self.p_out
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedGraph {
    pub graph: EndorsementGraph,
    /// Block membership: `x…` nodes on X, `y…` nodes on Y.
    pub truth: Bipartition,
    /// Edges added after sampling to make the graph connected.
    pub bridges: Vec<(String, String)>,
}

impl PlantedGraph {
    pub fn inter_block_bridges(&self) -> usize {
        self.bridges
            .iter()
            .filter(|(a, b)| a.as_bytes()[0] != b.as_bytes()[0])
            .count()
    }
}

fn block_id(side: char, i: usize, width: usize) -> String {
    format!("{side}{i:0width$}")
}

/// Two blocks of `n_per_side` nodes; pairs within a block are joined with
/// probability `p_in`, across blocks with `p_out`. A disconnected sample is
/// then joined with the fewest bridges, recorded in `bridges`.
pub fn planted_partition(spec: &PlantedSpec) -> Result<PlantedGraph> {
    spec.validate()?;
    let n = spec.n_per_side;
    let width = (n - 1).to_string().len();
    let ids: Vec<String> = ['x', 'y']
        .iter()
        .flat_map(|&s| (0..n).map(move |i| block_id(s, i, width)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for u in 0..2 * n {
        for v in u + 1..2 * n {
            let p = if (u < n) == (v < n) { spec.p_in } else { spec.p_out };
            if rng.gen::<f64>() < p {
                edges.push((u, v));
            }
        }
    }

    // Join components largest first with k - 1 bridges, each landing on a
    // same-block node of the already joined part whenever one exists.
    let sampled = EndorsementGraph::from_parts(
        ids.iter().cloned(),
        edges.iter().map(|&(u, v)| (ids[u].clone(), ids[v].clone(), 1)),
    );
    // Node order equals `ids` order: ids sort by block, then zero-padded index.
    let mut pieces = connected_components(&sampled);
    pieces.sort_by_key(|c| std::cmp::Reverse(c.len()));
    let mut bridges: Vec<(usize, usize)> = Vec::new();
    let mut joined: Vec<usize> = pieces[0].clone();
    for piece in &pieces[1..] {
        let a = *piece.choose(&mut rng).unwrap();
        let same_block: Vec<usize> = joined.iter().copied().filter(|&u| (u < n) == (a < n)).collect();
        let pool = if same_block.is_empty() { &joined } else { &same_block };
        let b = *pool.choose(&mut rng).unwrap();
        bridges.push((a.min(b), a.max(b)));
        joined.extend_from_slice(piece);
    }
    edges.extend_from_slice(&bridges);

    let graph = EndorsementGraph::from_edges(
        edges
            .iter()
            .map(|&(u, v)| (ids[u].clone(), ids[v].clone(), PLANTED_EDGE_WEIGHT)),
    );
    let sides: Vec<Side> = (0..2 * n).map(|u| if u < n { Side::X } else { Side::Y }).collect();
    let truth = Bipartition::from_sides(&graph, sides)?;
    Ok(PlantedGraph {
        graph,
        truth,
        bridges: bridges
            .into_iter()
            .map(|(u, v)| (ids[u].clone(), ids[v].clone()))
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunitySpec {
    pub authors: usize,
    /// Noun tokens used in this community's topical posts.
    pub topic_tokens: Vec<String>,
    /// Sentiment lean in [-1, 1] of topical posts.
    #[serde(default)]
    pub polarity_bias: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountRange {
    pub min: usize,
    pub max: usize,
}

impl CountRange {
    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        rng.gen_range(self.min..=self.max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentVocabulary {
    pub positive: Vec<String>,
    pub negative: Vec<String>,
}

impl Default for SentimentVocabulary {
    fn default() -> Self {
        SentimentVocabulary {
            positive: vec!["good".into(), "great".into()],
            negative: vec!["bad".into(), "awful".into()],
        }
    }
}

fn default_background_cross() -> f64 {
    0.5
}

fn default_topic_share() -> f64 {
    0.5
}

fn default_favorites() -> usize {
    10
}

/// Corpus generator settings.
///
/// Each author keeps a few favorite accounts per post kind and reposts only
/// from them, so repeated reposts build up edge weight. Topical favorites are
/// drawn from another community with probability `cross_repost_rate`,
/// background favorites with `background_cross_rate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub communities: Vec<CommunitySpec>,
    /// Noun tokens of non-topical posts, shared by every community.
    pub background_tokens: Vec<String>,
    pub cross_repost_rate: f64,
    #[serde(default = "default_background_cross")]
    pub background_cross_rate: f64,
    /// Share of posts and reposts that are topical.
    #[serde(default = "default_topic_share")]
    pub topic_share: f64,
    pub window: TimeWindow,
    pub posts_per_author: CountRange,
    pub reposts_per_author: CountRange,
    #[serde(default = "default_favorites")]
    pub favorites: usize,
    #[serde(default)]
    pub sentiment_tokens: SentimentVocabulary,
    pub seed: u64,
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.communities.is_empty() {
            return bad("at least one community");
        }
        for p in [self.cross_repost_rate, self.background_cross_rate, self.topic_share] {
            if !(0.0..=1.0).contains(&p) {
                return bad("rates must lie in [0, 1]");
            }
        }
        if self.communities.iter().any(|c| c.authors == 0 || c.topic_tokens.is_empty()) {
            return bad("communities need authors and topic tokens");
        }
        if self.communities.iter().any(|c| !(-1.0..=1.0).contains(&c.polarity_bias)) {
            return bad("polarity bias must lie in [-1, 1]");
        }
        if self.background_tokens.is_empty() {
            return bad("at least one background token");
        }
        if self.posts_per_author.min < 2 || self.posts_per_author.min > self.posts_per_author.max {
            return bad("posts_per_author needs 2 <= min <= max");
        }
        if self.reposts_per_author.min > self.reposts_per_author.max {
            return bad("reposts_per_author needs min <= max");
        }
        if self.favorites == 0 {
            return bad("favorites must be positive");
        }
        let total: usize = self.communities.iter().map(|c| c.authors).sum();
        if total < 2 {
            return bad("need at least two authors");
        }
        if self.sentiment_tokens.positive.is_empty() || self.sentiment_tokens.negative.is_empty() {
            return bad("sentiment vocabulary needs positive and negative words");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuthorTotals {
    pub author_id: String,
    pub community: usize,
    pub posts: usize,
    pub reposts: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub records: Vec<InteractionRecord>,
    pub authors: Vec<AuthorTotals>,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Kind {
    Topic,
    Background,
}

pub fn synth_corpus(spec: &CorpusSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut authors: Vec<AuthorTotals> = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for (ci, c) in spec.communities.iter().enumerate() {
        let width = c.authors.saturating_sub(1).to_string().len();
        members.push((authors.len()..authors.len() + c.authors).collect());
        for j in 0..c.authors {
            authors.push(AuthorTotals {
                author_id: format!("c{ci}_u{j:0width$}"),
                community: ci,
                posts: 0,
                reposts: 0,
            });
        }
    }
    let window = &spec.window;
    let mut records: Vec<InteractionRecord> = Vec::new();
    let mut posts_by: HashMap<(usize, Kind), Vec<usize>> = HashMap::new();

    let think = Token::new("think", "VERB");
    for (a, author) in authors.iter_mut().enumerate() {
        let community = &spec.communities[author.community];
        let n_posts = spec.posts_per_author.sample(&mut rng);
        author.posts = n_posts;
        for k in 0..n_posts {
            let kind = match k {
                0 => Kind::Topic,
                1 => Kind::Background,
                _ if rng.gen::<f64>() < spec.topic_share => Kind::Topic,
                _ => Kind::Background,
            };
            let (noun, bias) = match kind {
                Kind::Topic => (community.topic_tokens.choose(&mut rng).unwrap(), community.polarity_bias),
                Kind::Background => (spec.background_tokens.choose(&mut rng).unwrap(), 0.0),
            };
            let words = if rng.gen::<f64>() < (1.0 + bias) / 2.0 {
                &spec.sentiment_tokens.positive
            } else {
                &spec.sentiment_tokens.negative
            };
            let adj = words.choose(&mut rng).unwrap();
            posts_by.entry((a, kind)).or_default().push(records.len());
            records.push(InteractionRecord {
                post_id: format!("p{}", records.len()),
                author_id: author.author_id.clone(),
                timestamp: rng.gen_range(window.start..window.end),
                tokens: vec![Token::new(noun.clone(), "NOUN"), think.clone(), Token::new(adj.clone(), "ADJ")],
                repost_of: None,
            });
        }
    }

    let n_originals = records.len();
    for (a, author) in authors.iter_mut().enumerate() {
        let own = author.community;
        let mut favorites = HashMap::new();
        for (kind, cross) in [
            (Kind::Topic, spec.cross_repost_rate),
            (Kind::Background, spec.background_cross_rate),
        ] {
            favorites.insert(kind, pick_favorites(a, own, &members, cross, spec.favorites, &mut rng));
        }
        let n_reposts = spec.reposts_per_author.sample(&mut rng);
        author.reposts = n_reposts;
        for _ in 0..n_reposts {
            let kind = if rng.gen::<f64>() < spec.topic_share { Kind::Topic } else { Kind::Background };
            let target = *favorites[&kind].choose(&mut rng).expect("favorites non-empty");
            let pool = &posts_by[&(target, kind)];
            let orig = &records[*pool.choose(&mut rng).unwrap()];
            let repost = InteractionRecord {
                post_id: format!("r{}", records.len() - n_originals),
                author_id: author.author_id.clone(),
                timestamp: rng.gen_range(orig.timestamp..window.end),
                tokens: Vec::new(),
                repost_of: Some(RepostRef {
                    post_id: orig.post_id.clone(),
                    author_id: orig.author_id.clone(),
                }),
            };
            records.push(repost);
        }
    }
    Ok(SynthCorpus { records, authors })
}

/// `count` favorites for author `a` (with repeats when a pool is small),
/// each from another community with probability `cross`.
fn pick_favorites(
    a: usize,
    own: usize,
    members: &[Vec<usize>],
    cross: f64,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let others: Vec<usize> = members
        .iter()
        .enumerate()
        .filter(|(c, _)| *c != own)
        .flat_map(|(_, m)| m.iter().copied())
        .collect();
    let same: Vec<usize> = members[own].iter().copied().filter(|&u| u != a).collect();
    (0..count)
        .filter_map(|_| {
            let go_out = !others.is_empty() && (same.is_empty() || rng.gen::<f64>() < cross);
            let pool = if go_out { &others } else { &same };
            pool.choose(rng).copied()
        })
        .collect()
}
