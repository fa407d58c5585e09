//! Repost endorsement networks: construction from records, k-core peeling,
//! largest connected component and the minimum-size gate.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::InteractionRecord;

/// Undirected weighted user graph.
///
/// Node indices follow ascending author-id order, so every algorithm that
/// walks nodes by index sees the same canonical order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EndorsementGraph {
    ids: Vec<String>,
    adj: Vec<Vec<(usize, u32)>>,
    edge_count: usize,
}

impl EndorsementGraph {
    /// Build from weighted edges. Self-loops are dropped, repeated pairs are
    /// summed, and only edge endpoints become nodes.
    pub fn from_edges<I, S>(edges: I) -> Self
    where
        I: IntoIterator<Item = (S, S, u32)>,
        S: Into<String>,
    {
        Self::from_parts(std::iter::empty::<String>(), edges)
    }

    /// Like [`from_edges`](Self::from_edges) but also keeps the listed nodes,
    /// isolated or not.
    pub fn from_parts<N, I, S, T>(nodes: N, edges: I) -> Self
    where
        N: IntoIterator<Item = T>,
        T: Into<String>,
        I: IntoIterator<Item = (S, S, u32)>,
        S: Into<String>,
    {
        let mut pairs: BTreeMap<(String, String), u32> = BTreeMap::new();
        let mut names: Vec<String> = nodes.into_iter().map(Into::into).collect();
        for (a, b, w) in edges {
            let (a, b) = (a.into(), b.into());
            if a == b || w == 0 {
                continue;
            }
            let key = if a < b { (a, b) } else { (b, a) };
            *pairs.entry(key).or_insert(0) += w;
        }
        for (a, b) in pairs.keys() {
            names.push(a.clone());
            names.push(b.clone());
        }
        names.sort_unstable();
        names.dedup();
        let index: HashMap<&str, usize> = names
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let mut adj = vec![Vec::new(); names.len()];
        for ((a, b), w) in &pairs {
            let (u, v) = (index[a.as_str()], index[b.as_str()]);
            adj[u].push((v, *w));
            adj[v].push((u, *w));
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        EndorsementGraph {
            ids: names,
            adj,
            edge_count: pairs.len(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, node: usize) -> &str {
        &self.ids[node]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.binary_search_by(|x| x.as_str().cmp(id)).ok()
    }

    /// Neighbors of `node` with edge weights, in ascending index order.
    pub fn neighbors(&self, node: usize) -> &[(usize, u32)] {
        &self.adj[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adj[node].len()
    }

    pub fn weighted_degree(&self, node: usize) -> u64 {
        self.adj[node].iter().map(|&(_, w)| u64::from(w)).sum()
    }

    pub fn weight(&self, u: usize, v: usize) -> Option<u32> {
        let list = &self.adj[u];
        list.binary_search_by(|&(x, _)| x.cmp(&v))
            .ok()
            .map(|i| list[i].1)
    }

    /// Each edge once as `(u, v, weight)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, u32)> + '_ {
        self.adj.iter().enumerate().flat_map(|(u, list)| {
            list.iter()
                .filter(move |&&(v, _)| u < v)
                .map(move |&(v, w)| (u, v, w))
        })
    }

    pub fn total_weight(&self) -> u64 {
        self.edges().map(|(_, _, w)| u64::from(w)).sum()
    }

    /// Subgraph induced by nodes with `keep[i]`. Relative node order is kept.
    pub fn induced_subgraph(&self, keep: &[bool]) -> Self {
        assert_eq!(keep.len(), self.node_count());
        let mut remap = vec![usize::MAX; self.node_count()];
        let mut ids = Vec::new();
        for (i, _) in keep.iter().enumerate().filter(|(_, k)| **k) {
            remap[i] = ids.len();
            ids.push(self.ids[i].clone());
        }
        let mut edge_count = 0;
        let adj: Vec<Vec<(usize, u32)>> = (0..self.node_count())
            .filter(|&i| keep[i])
            .map(|i| {
                self.adj[i]
                    .iter()
                    .filter(|&&(v, _)| keep[v])
                    .map(|&(v, w)| {
                        if i < v {
                            edge_count += 1;
                        }
                        (remap[v], w)
                    })
                    .collect()
            })
            .collect();
        EndorsementGraph {
            ids,
            adj,
            edge_count,
        }
    }

    pub fn is_connected(&self) -> bool {
        self.node_count() <= 1 || connected_components(self).len() == 1
    }

    /// Edge-list dump: `u v w` per line, edges in canonical order.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for (u, v, w) in self.edges() {
            let _ = writeln!(out, "{} {} {}", self.ids[u], self.ids[v], w);
        }
        out
    }

    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::Parse(format!("edge list line {}: {line:?}", lineno + 1));
            let [u, v, w] = fields[..] else {
                return Err(bad());
            };
            let w: u32 = w.parse().map_err(|_| bad())?;
            edges.push((u.to_string(), v.to_string(), w));
        }
        Ok(Self::from_edges(edges))
    }
}

/// Endorsement graph of one record slice: for each unordered author pair the
/// weight is the number of reposts either made of the other's posts. Pairs
/// with weight below `min_rt` are dropped, as are self-reposts.
pub fn build_graph<'a, I>(records: I, min_rt: u32) -> EndorsementGraph
where
    I: IntoIterator<Item = &'a InteractionRecord>,
{
    let mut counts: HashMap<(&str, &str), u32> = HashMap::new();
    for r in records {
        let Some(orig) = &r.repost_of else { continue };
        let (a, b) = (r.author_id.as_str(), orig.author_id.as_str());
        if a == b {
            continue;
        }
        let key = if a < b { (a, b) } else { (b, a) };
        *counts.entry(key).or_insert(0) += 1;
    }
    EndorsementGraph::from_edges(
        counts
            .into_iter()
            .filter(|&(_, w)| w >= min_rt)
            .map(|((a, b), w)| (a, b, w)),
    )
}

/// Maximal subgraph where every node has at least `k` incident edges.
pub fn k_core(g: &EndorsementGraph, k: usize) -> EndorsementGraph {
    let n = g.node_count();
    let mut degree: Vec<usize> = (0..n).map(|u| g.degree(u)).collect();
    let mut alive = vec![true; n];
    let mut queue: Vec<usize> = (0..n).filter(|&u| degree[u] < k).collect();
    for &u in &queue {
        alive[u] = false;
    }
    while let Some(u) = queue.pop() {
        for &(v, _) in g.neighbors(u) {
            if alive[v] {
                degree[v] -= 1;
                if degree[v] < k {
                    alive[v] = false;
                    queue.push(v);
                }
            }
        }
    }
    g.induced_subgraph(&alive)
}

/// Connected components as ascending node-index lists, ordered by their
/// smallest member.
pub fn connected_components(g: &EndorsementGraph) -> Vec<Vec<usize>> {
    let n = g.node_count();
    let mut seen = vec![false; n];
    let mut components = Vec::new();
    let mut queue = VecDeque::new();
    for root in 0..n {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        queue.push_back(root);
        let mut members = Vec::new();
        while let Some(u) = queue.pop_front() {
            members.push(u);
            for &(v, _) in g.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        members.sort_unstable();
        components.push(members);
    }
    components
}

/// The component with the most nodes; ties go to the component holding the
/// smallest author id.
pub fn largest_component(g: &EndorsementGraph) -> EndorsementGraph {
    let components = connected_components(g);
    // Components come ordered by minimum id, so the first maximum wins ties.
    let Some(best) = components
        .iter()
        .reduce(|best, c| if c.len() > best.len() { c } else { best })
    else {
        return EndorsementGraph::default();
    };
    if best.len() == g.node_count() {
        return g.clone();
    }
    let mut keep = vec![false; g.node_count()];
    for &u in best {
        keep[u] = true;
    }
    g.induced_subgraph(&keep)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphParams {
    pub min_rt: u32,
    pub k_core: usize,
    pub min_nodes: usize,
}

impl Default for GraphParams {
    fn default() -> Self {
        GraphParams {
            min_rt: 2,
            k_core: 2,
            min_nodes: 800,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PreparedGraph {
    Ready(EndorsementGraph),
    /// Fewer than `min_nodes` nodes survived; carries the surviving count.
    UnderSized(usize),
}

impl PreparedGraph {
    pub fn node_count(&self) -> usize {
        match self {
            PreparedGraph::Ready(g) => g.node_count(),
            PreparedGraph::UnderSized(n) => *n,
        }
    }
}

/// `build_graph`, then k-core, then the largest component, then the size gate.
pub fn prepare_conversation_graph<'a, I>(records: I, params: &GraphParams) -> PreparedGraph
where
    I: IntoIterator<Item = &'a InteractionRecord>,
{
    let g = build_graph(records, params.min_rt);
    let g = largest_component(&k_core(&g, params.k_core));
    if g.node_count() < params.min_nodes {
        PreparedGraph::UnderSized(g.node_count())
    } else {
        PreparedGraph::Ready(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{RepostRef, Token};
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn post(id: &str, author: &str) -> InteractionRecord {
        InteractionRecord {
            post_id: id.into(),
            author_id: author.into(),
            timestamp: 0,
            tokens: vec![Token::new("x", "NOUN")],
            repost_of: None,
        }
    }

    fn rt(id: &str, author: &str, orig_id: &str, orig_author: &str) -> InteractionRecord {
        InteractionRecord {
            post_id: id.into(),
            author_id: author.into(),
            timestamp: 0,
            tokens: vec![],
            repost_of: Some(RepostRef {
                post_id: orig_id.into(),
                author_id: orig_author.into(),
            }),
        }
    }

    fn edge_set(g: &EndorsementGraph) -> BTreeSet<(String, String, u32)> {
        g.edges()
            .map(|(u, v, w)| (g.id(u).to_string(), g.id(v).to_string(), w))
            .collect()
    }

    fn graph(edges: &[(&str, &str)]) -> EndorsementGraph {
        EndorsementGraph::from_edges(edges.iter().map(|&(a, b)| (a, b, 2)))
    }

    #[test]
    fn two_reposts_make_an_edge() {
        let recs = vec![post("p", "v"), rt("r1", "u", "p", "v"), rt("r2", "u", "p", "v")];
        let g = build_graph(&recs, 2);
        assert_eq!(edge_set(&g), BTreeSet::from([("u".into(), "v".into(), 2)]));
        assert!(build_graph(&recs[..2], 2).is_empty());
    }

    #[test]
    fn mutual_reposts_sum() {
        let recs = vec![
            post("p", "v"),
            post("q", "u"),
            rt("r1", "u", "p", "v"),
            rt("r2", "v", "q", "u"),
        ];
        let g = build_graph(&recs, 2);
        assert_eq!(edge_set(&g), BTreeSet::from([("u".into(), "v".into(), 2)]));
    }

    #[test]
    fn self_reposts_ignored() {
        let recs = vec![post("p", "u"), rt("r1", "u", "p", "u"), rt("r2", "u", "p", "u")];
        let g = build_graph(&recs, 1);
        assert!(g.is_empty());
        assert_eq!(g.index_of("u"), None);
    }

    #[test]
    fn k_core_small_cases() {
        let path = graph(&[("a", "b"), ("b", "c")]);
        assert!(k_core(&path, 2).is_empty());
        let tri = graph(&[("a", "b"), ("b", "c"), ("a", "c")]);
        assert_eq!(k_core(&tri, 2), tri);
        let tailed = graph(&[("a", "b"), ("b", "c"), ("a", "c"), ("c", "d")]);
        assert_eq!(k_core(&tailed, 2), tri);
    }

    #[test]
    fn largest_component_cases() {
        let g = graph(&[
            ("a", "b"), ("b", "c"), ("c", "d"), ("d", "e"),
            ("x", "y"), ("y", "z"),
        ]);
        let lc = largest_component(&g);
        assert_eq!(lc.ids(), &["a", "b", "c", "d", "e"]);
        let connected = graph(&[("a", "b"), ("b", "c")]);
        assert_eq!(largest_component(&connected), connected);
        let tie = graph(&[
            ("m", "n"), ("n", "o"), ("o", "p"),
            ("d", "q"), ("q", "r"), ("r", "s"),
        ]);
        assert_eq!(largest_component(&tie).ids(), &["d", "q", "r", "s"]);
    }

    #[test]
    fn prepare_gates_on_size() {
        let mut recs = Vec::new();
        for i in 0..10 {
            recs.push(post(&format!("p{i}"), &format!("a{i}")));
        }
        for i in 0..10 {
            for j in 0..2 {
                let orig = (i + 1) % 10;
                recs.push(rt(&format!("r{i}_{j}"), &format!("a{i}"), &format!("p{orig}"), &format!("a{orig}")));
            }
        }
        let params = GraphParams::default();
        assert_eq!(prepare_conversation_graph(&recs, &params), PreparedGraph::UnderSized(10));
        let small = GraphParams { min_nodes: 10, ..params };
        match prepare_conversation_graph(&recs, &small) {
            PreparedGraph::Ready(g) => assert_eq!(g.node_count(), 10),
            other => panic!("expected ready graph, got {other:?}"),
        }
        // A star peels away entirely under k = 2.
        let star: Vec<InteractionRecord> = (0..20)
            .flat_map(|i| {
                let a = format!("s{i}");
                vec![rt(&format!("x{i}"), &a, "hub_p", "hub"), rt(&format!("y{i}"), &a, "hub_p", "hub")]
            })
            .collect();
        assert_eq!(prepare_conversation_graph(&star, &params), PreparedGraph::UnderSized(0));
    }

    #[test]
    fn edge_list_round_trip() {
        let g = EndorsementGraph::from_edges([("b", "a", 3), ("b", "c", 2), ("a", "b", 1)]);
        assert_eq!(g.weight(0, 1), Some(4));
        let text = g.to_edge_list();
        assert_eq!(text, "a b 4\nb c 2\n");
        assert_eq!(EndorsementGraph::parse_edge_list(&text).unwrap(), g);
        assert!(EndorsementGraph::parse_edge_list("a b").is_err());
    }

    fn arb_graph(max_nodes: usize) -> impl Strategy<Value = EndorsementGraph> {
        prop::collection::vec((0..max_nodes, 0..max_nodes), 0..max_nodes * 3).prop_map(|pairs| {
            EndorsementGraph::from_edges(
                pairs.into_iter().map(|(a, b)| (format!("n{a:02}"), format!("n{b:02}"), 2)),
            )
        })
    }

    proptest! {
        #[test]
        fn k_core_idempotent_and_nested(g in arb_graph(14), k in 1usize..4) {
            let core = k_core(&g, k);
            prop_assert_eq!(&k_core(&core, k), &core);
            let inner = k_core(&g, k + 1);
            for id in inner.ids() {
                prop_assert!(core.index_of(id).is_some());
            }
            for u in 0..core.node_count() {
                prop_assert!(core.degree(u) >= k);
            }
        }

        #[test]
        fn largest_component_is_connected_induced(g in arb_graph(14)) {
            let lc = largest_component(&g);
            prop_assert!(lc.is_connected());
            for (u, v, w) in lc.edges() {
                let (gu, gv) = (g.index_of(lc.id(u)).unwrap(), g.index_of(lc.id(v)).unwrap());
                prop_assert_eq!(g.weight(gu, gv), Some(w));
            }
            for u in 0..lc.node_count() {
                let gu = g.index_of(lc.id(u)).unwrap();
                prop_assert_eq!(lc.degree(u), g.degree(gu));
            }
        }

        #[test]
        fn build_is_permutation_invariant(
            rts in prop::collection::vec((0usize..6, 0usize..6), 0..40), rot in 0usize..40
        ) {
            let recs: Vec<InteractionRecord> = rts.iter().enumerate()
                .map(|(i, (a, b))| rt(&format!("r{i}"), &format!("u{a}"), &format!("p{b}"), &format!("u{b}")))
                .collect();
            let mut shuffled = recs.clone();
            if !shuffled.is_empty() {
                let len = shuffled.len();
                shuffled.rotate_left(rot % len);
            }
            shuffled.reverse();
            prop_assert_eq!(build_graph(&recs, 2), build_graph(&shuffled, 2));
        }

        #[test]
        fn prepared_graph_is_connected_2_core(g in arb_graph(20)) {
            let params = GraphParams { min_nodes: 1, ..GraphParams::default() };
            let recs: Vec<InteractionRecord> = g.edges().enumerate().flat_map(|(i, (u, v, _))| {
                vec![
                    rt(&format!("a{i}"), g.id(u), "p", g.id(v)),
                    rt(&format!("b{i}"), g.id(v), "q", g.id(u)),
                ]
            }).collect();
            if let PreparedGraph::Ready(h) = prepare_conversation_graph(&recs, &params) {
                prop_assert!(h.is_connected());
                for u in 0..h.node_count() {
                    prop_assert!(h.degree(u) >= 2);
                }
            }
        }
    }
}
