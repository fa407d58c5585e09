//! Multilevel balanced bisection in the METIS mould.
//!
//! The graph is coarsened by heavy-edge matching until it has at most
//! [`COARSEN_TO`] vertices, bisected there by greedy graph growing from
//! several start vertices, then projected back level by level with
//! Fiduccia–Mattheyses refinement at each level. Balance counts nodes; edge
//! weights drive matching and move gains.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{connected_components, EndorsementGraph};

pub const DEFAULT_BALANCE_EPS: f64 = 0.05;
pub const MAX_BALANCE_EPS: f64 = 0.1;
pub const COARSEN_TO: usize = 64;

const INITIAL_TRIALS: usize = 16;
const MAX_PASSES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    X,
    Y,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::X => Side::Y,
            Side::Y => Side::X,
        }
    }

    fn from_index(i: u8) -> Side {
        if i == 0 {
            Side::X
        } else {
            Side::Y
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::X => "X",
            Side::Y => "Y",
        })
    }
}

/// Two-sided assignment of a graph's nodes, indexed like the graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bipartition {
    side_of: Vec<Side>,
    /// Edges with endpoints on opposite sides.
    pub cut: usize,
    /// Summed weight of those edges.
    pub weighted_cut: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CutSize {
    pub edges: usize,
    pub weight: u64,
}

impl Bipartition {
    pub fn from_sides(g: &EndorsementGraph, side_of: Vec<Side>) -> Result<Self> {
        let cut = cut_of(g, &side_of)?;
        Ok(Bipartition {
            side_of,
            cut: cut.edges,
            weighted_cut: cut.weight,
        })
    }

    /// Build from an id-keyed assignment; every graph node must be present.
    pub fn from_assignment(g: &EndorsementGraph, sides: &HashMap<String, Side>) -> Result<Self> {
        let side_of = g
            .ids()
            .iter()
            .map(|id| {
                sides
                    .get(id)
                    .copied()
                    .ok_or_else(|| Error::UnassignedNode(id.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_sides(g, side_of)
    }

    pub fn side(&self, node: usize) -> Side {
        self.side_of[node]
    }

    pub fn sides(&self) -> &[Side] {
        &self.side_of
    }

    pub fn members(&self, side: Side) -> impl Iterator<Item = usize> + '_ {
        self.side_of
            .iter()
            .enumerate()
            .filter(move |(_, s)| **s == side)
            .map(|(i, _)| i)
    }

    pub fn side_size(&self, side: Side) -> usize {
        self.side_of.iter().filter(|s| **s == side).count()
    }

    /// Larger side over total node count.
    pub fn balance(&self) -> f64 {
        let x = self.side_size(Side::X);
        let y = self.side_of.len() - x;
        x.max(y) as f64 / self.side_of.len() as f64
    }

    pub fn swapped(&self) -> Bipartition {
        Bipartition {
            side_of: self.side_of.iter().map(|s| s.other()).collect(),
            cut: self.cut,
            weighted_cut: self.weighted_cut,
        }
    }

    /// `node side` per line in node-id order.
    pub fn to_dump(&self, g: &EndorsementGraph) -> String {
        g.ids()
            .iter()
            .zip(&self.side_of)
            .map(|(id, s)| format!("{id} {s}\n"))
            .collect()
    }
}

/// Crossing edges of `p` over `g`, by count and by weight.
pub fn cut_size(g: &EndorsementGraph, p: &Bipartition) -> Result<CutSize> {
    cut_of(g, &p.side_of)
}

fn cut_of(g: &EndorsementGraph, side_of: &[Side]) -> Result<CutSize> {
    if side_of.len() < g.node_count() {
        return Err(Error::UnassignedNode(g.id(side_of.len()).to_string()));
    }
    let mut cut = CutSize { edges: 0, weight: 0 };
    for (u, v, w) in g.edges() {
        if side_of[u] != side_of[v] {
            cut.edges += 1;
            cut.weight += u64::from(w);
        }
    }
    Ok(cut)
}

/// Largest side size allowed for `n` nodes at tolerance `eps`: the larger of
/// `ceil(n/2)` and `floor((0.5 + eps) n)`.
pub fn max_side_size(n: usize, eps: f64) -> usize {
    let relaxed = ((0.5 + eps) * n as f64 + 1e-9).floor() as usize;
    n.div_ceil(2).max(relaxed)
}

/// Split a connected graph into two near-equal sides with a small edge cut.
pub fn bisect(g: &EndorsementGraph, eps: f64, seed: u64) -> Result<Bipartition> {
    let n = g.node_count();
    if n < 2 {
        return Err(Error::TooSmall(n));
    }
    if !(0.0..=MAX_BALANCE_EPS).contains(&eps) {
        return Err(Error::Config(format!(
            "balance eps {eps} outside [0, {MAX_BALANCE_EPS}]"
        )));
    }
    let components = connected_components(g).len();
    if components > 1 {
        return Err(Error::Disconnected(components));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_side = max_side_size(n, eps) as u64;

    let mut levels = vec![WorkGraph::from_graph(g)];
    let mut maps: Vec<Vec<usize>> = Vec::new();
    let max_vwgt = (3 * n as u64).div_ceil(2 * COARSEN_TO as u64).max(1);
    while levels.last().unwrap().len() > COARSEN_TO {
        let fine = levels.last().unwrap();
        let (coarse, cmap) = fine.coarsen(&mut rng, max_vwgt);
        // Stalled matching: more levels would not shrink the graph.
        if coarse.len() as f64 > 0.95 * fine.len() as f64 {
            break;
        }
        levels.push(coarse);
        maps.push(cmap);
    }

    let coarsest = levels.last().unwrap();
    let mut part = initial_bisection(coarsest, max_side, &mut rng);
    for level in (0..maps.len()).rev() {
        let cmap = &maps[level];
        part = cmap.iter().map(|&c| part[c]).collect();
        fm_refine(&levels[level], &mut part, max_side);
    }
    force_balance(&levels[0], &mut part, max_side);

    Bipartition::from_sides(g, part.into_iter().map(Side::from_index).collect())
}

/// Vertex- and edge-weighted graph in compressed adjacency form.
struct WorkGraph {
    vwgt: Vec<u64>,
    xadj: Vec<usize>,
    adjncy: Vec<usize>,
    adjwgt: Vec<u64>,
}

impl WorkGraph {
    fn from_graph(g: &EndorsementGraph) -> Self {
        let n = g.node_count();
        let mut xadj = Vec::with_capacity(n + 1);
        let mut adjncy = Vec::new();
        let mut adjwgt = Vec::new();
        xadj.push(0);
        for u in 0..n {
            for &(v, w) in g.neighbors(u) {
                adjncy.push(v);
                adjwgt.push(u64::from(w));
            }
            xadj.push(adjncy.len());
        }
        WorkGraph {
            vwgt: vec![1; n],
            xadj,
            adjncy,
            adjwgt,
        }
    }

    fn len(&self) -> usize {
        self.vwgt.len()
    }

    fn total_vwgt(&self) -> u64 {
        self.vwgt.iter().sum()
    }

    fn neighbors(&self, u: usize) -> impl Iterator<Item = (usize, u64)> + '_ {
        let range = self.xadj[u]..self.xadj[u + 1];
        self.adjncy[range.clone()]
            .iter()
            .copied()
            .zip(self.adjwgt[range].iter().copied())
    }

    /// Heavy-edge matching in random visit order, then contraction.
    fn coarsen(&self, rng: &mut ChaCha8Rng, max_vwgt: u64) -> (WorkGraph, Vec<usize>) {
        let n = self.len();
        const UNMATCHED: usize = usize::MAX;
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let mut mate = vec![UNMATCHED; n];
        for &u in &order {
            if mate[u] != UNMATCHED {
                continue;
            }
            let mut best: Option<(usize, u64)> = None;
            for (v, w) in self.neighbors(u) {
                if mate[v] != UNMATCHED || self.vwgt[u] + self.vwgt[v] > max_vwgt {
                    continue;
                }
                if best.is_none_or(|(_, bw)| w > bw) {
                    best = Some((v, w));
                }
            }
            match best {
                Some((v, _)) => {
                    mate[u] = v;
                    mate[v] = u;
                }
                None => mate[u] = u,
            }
        }

        let mut cmap = vec![UNMATCHED; n];
        let mut coarse_n = 0;
        for u in 0..n {
            if cmap[u] == UNMATCHED {
                cmap[u] = coarse_n;
                cmap[mate[u]] = coarse_n;
                coarse_n += 1;
            }
        }

        let mut vwgt = vec![0u64; coarse_n];
        let mut members: Vec<Vec<usize>> = vec![Vec::with_capacity(2); coarse_n];
        for u in 0..n {
            vwgt[cmap[u]] += self.vwgt[u];
            members[cmap[u]].push(u);
        }
        let mut xadj = Vec::with_capacity(coarse_n + 1);
        let mut adjncy = Vec::new();
        let mut adjwgt = Vec::new();
        // slot[c] = position of coarse neighbor c in the row being built.
        let mut slot = vec![UNMATCHED; coarse_n];
        xadj.push(0);
        for (c, fine) in members.iter().enumerate() {
            let row_start = adjncy.len();
            for &u in fine {
                for (v, w) in self.neighbors(u) {
                    let cv = cmap[v];
                    if cv == c {
                        continue;
                    }
                    if slot[cv] == UNMATCHED {
                        slot[cv] = adjncy.len();
                        adjncy.push(cv);
                        adjwgt.push(w);
                    } else {
                        adjwgt[slot[cv]] += w;
                    }
                }
            }
            for &cv in &adjncy[row_start..] {
                slot[cv] = UNMATCHED;
            }
            xadj.push(adjncy.len());
        }
        (
            WorkGraph {
                vwgt,
                xadj,
                adjncy,
                adjwgt,
            },
            cmap,
        )
    }
}

/// Ordering key for a partition state: infeasibility, then cut, then imbalance.
fn state_key(side_w: [u64; 2], cut: u64, max_side: u64) -> (u64, u64, u64) {
    let over = side_w[0].saturating_sub(max_side) + side_w[1].saturating_sub(max_side);
    (over, cut, side_w[0].abs_diff(side_w[1]))
}

fn side_weights(g: &WorkGraph, part: &[u8]) -> [u64; 2] {
    let mut w = [0u64; 2];
    for (u, &p) in part.iter().enumerate() {
        w[p as usize] += g.vwgt[u];
    }
    w
}

fn cut_weight(g: &WorkGraph, part: &[u8]) -> u64 {
    let mut cut = 0;
    for u in 0..g.len() {
        for (v, w) in g.neighbors(u) {
            if u < v && part[u] != part[v] {
                cut += w;
            }
        }
    }
    cut
}

/// Grow side 1 from `start` by best gain until it holds half the weight.
fn grow_from(g: &WorkGraph, start: usize, max_side: u64) -> Vec<u8> {
    let n = g.len();
    let target = g.total_vwgt() / 2;
    let mut part = vec![0u8; n];
    // gain[v] = weight to side 1 minus weight to side 0, for v on side 0.
    let mut gain: Vec<i64> = (0..n)
        .map(|u| -(g.neighbors(u).map(|(_, w)| w as i64).sum::<i64>()))
        .collect();
    let mut heap = BinaryHeap::new();
    heap.push((gain[start], Reverse(start)));
    let mut grown = 0u64;
    while grown < target {
        let Some((gv, Reverse(v))) = heap.pop() else {
            break;
        };
        if part[v] == 1 || gv != gain[v] {
            continue;
        }
        if grown + g.vwgt[v] > max_side {
            continue;
        }
        part[v] = 1;
        grown += g.vwgt[v];
        for (u, w) in g.neighbors(v) {
            if part[u] == 0 {
                gain[u] += 2 * w as i64;
                heap.push((gain[u], Reverse(u)));
            }
        }
    }
    part
}

fn initial_bisection(g: &WorkGraph, max_side: u64, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let n = g.len();
    let starts: Vec<usize> = if n <= INITIAL_TRIALS {
        (0..n).collect()
    } else {
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(rng);
        all.truncate(INITIAL_TRIALS);
        all
    };
    let mut best: Option<((u64, u64, u64), Vec<u8>)> = None;
    for start in starts {
        let mut part = grow_from(g, start, max_side);
        fm_refine(g, &mut part, max_side);
        let key = state_key(side_weights(g, &part), cut_weight(g, &part), max_side);
        if best.as_ref().is_none_or(|(k, _)| key < *k) {
            best = Some((key, part));
        }
    }
    best.expect("at least one trial").1
}

/// Fiduccia–Mattheyses passes with rollback to the best prefix of moves.
///
/// A move may overshoot `max_side` by one vertex weight; the next move is
/// then forced from the overweight side, so fixed-size swaps remain reachable
/// even at zero tolerance.
fn fm_refine(g: &WorkGraph, part: &mut [u8], max_side: u64) {
    let n = g.len();
    if n < 2 {
        return;
    }
    let slack = g.vwgt.iter().copied().max().unwrap_or(1);
    let limit = (n / 20).clamp(25, 200).min(n);
    for _ in 0..MAX_PASSES {
        let mut side_w = side_weights(g, part);
        let mut gain = vec![0i64; n];
        let mut boundary = vec![false; n];
        for u in 0..n {
            for (v, w) in g.neighbors(u) {
                if part[u] == part[v] {
                    gain[u] -= w as i64;
                } else {
                    gain[u] += w as i64;
                    boundary[u] = true;
                }
            }
        }
        let mut heaps: [BinaryHeap<(i64, Reverse<usize>)>; 2] = [BinaryHeap::new(), BinaryHeap::new()];
        for u in (0..n).filter(|&u| boundary[u]) {
            heaps[part[u] as usize].push((gain[u], Reverse(u)));
        }
        let mut locked = vec![false; n];
        let mut cut = cut_weight(g, part);
        let start_key = state_key(side_w, cut, max_side);
        let mut best_key = start_key;
        let mut best_len = 0;
        let mut moves: Vec<usize> = Vec::new();
        let mut since_best = 0;

        loop {
            let mut top = [None, None];
            for s in 0..2 {
                while let Some(&(gv, Reverse(v))) = heaps[s].peek() {
                    if locked[v] || part[v] as usize != s || gain[v] != gv {
                        heaps[s].pop();
                    } else {
                        top[s] = Some((gv, v));
                        break;
                    }
                }
            }
            let from = if side_w[0] > max_side {
                top[0].map(|_| 0)
            } else if side_w[1] > max_side {
                top[1].map(|_| 1)
            } else {
                let fits = |s: usize| {
                    top[s].filter(|&(_, v)| side_w[1 - s] + g.vwgt[v] <= max_side + slack)
                };
                match (fits(0), fits(1)) {
                    (Some(a), Some(b)) => Some(if b.0 > a.0 || (b.0 == a.0 && side_w[1] > side_w[0]) { 1 } else { 0 }),
                    (Some(_), None) => Some(0),
                    (None, Some(_)) => Some(1),
                    (None, None) => None,
                }
            };
            let Some(from) = from else { break };
            let (gv, v) = top[from].unwrap();
            heaps[from].pop();

            part[v] = 1 - part[v];
            side_w[from] -= g.vwgt[v];
            side_w[1 - from] += g.vwgt[v];
            cut = (cut as i64 - gv) as u64;
            gain[v] = -gain[v];
            locked[v] = true;
            moves.push(v);
            for (u, w) in g.neighbors(v) {
                if part[u] == part[v] {
                    gain[u] -= 2 * w as i64;
                } else {
                    gain[u] += 2 * w as i64;
                }
                if !locked[u] {
                    heaps[part[u] as usize].push((gain[u], Reverse(u)));
                }
            }

            let key = state_key(side_w, cut, max_side);
            if key < best_key {
                best_key = key;
                best_len = moves.len();
                since_best = 0;
            } else {
                since_best += 1;
                if since_best > limit {
                    break;
                }
            }
        }
        for &v in moves[best_len..].iter().rev() {
            part[v] = 1 - part[v];
        }
        if best_key >= start_key {
            break;
        }
    }
}

/// Move best-gain vertices off an overweight side until the bound holds.
fn force_balance(g: &WorkGraph, part: &mut [u8], max_side: u64) {
    let mut side_w = side_weights(g, part);
    while let Some(heavy) = (0..2).find(|&s| side_w[s] > max_side) {
        let v = (0..g.len())
            .filter(|&u| part[u] as usize == heavy)
            .max_by_key(|&u| {
                let gain: i64 = g
                    .neighbors(u)
                    .map(|(v, w)| if part[v] == part[u] { -(w as i64) } else { w as i64 })
                    .sum();
                (gain, Reverse(u))
            })
            .expect("overweight side is non-empty");
        part[v] = 1 - part[v];
        side_w[heavy] -= g.vwgt[v];
        side_w[1 - heavy] += g.vwgt[v];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clique_pair(m: usize, bridges: usize) -> EndorsementGraph {
        let mut edges = Vec::new();
        for side in ["a", "b"] {
            for i in 0..m {
                for j in i + 1..m {
                    edges.push((format!("{side}{i:03}"), format!("{side}{j:03}"), 2));
                }
            }
        }
        for i in 0..bridges {
            edges.push((format!("a{i:03}"), format!("b{i:03}"), 2));
        }
        EndorsementGraph::from_edges(edges)
    }

    #[test]
    fn two_five_cliques_with_bridge() {
        let g = clique_pair(5, 1);
        let p = bisect(&g, DEFAULT_BALANCE_EPS, 7).unwrap();
        assert_eq!(p.cut, 1);
        let a_side = p.side(g.index_of("a000").unwrap());
        for (i, id) in g.ids().iter().enumerate() {
            let expect = if id.starts_with('a') { a_side } else { a_side.other() };
            assert_eq!(p.side(i), expect, "{id}");
        }
    }

    #[test]
    fn single_edge() {
        let g = EndorsementGraph::from_edges([("u", "v", 2)]);
        let p = bisect(&g, 0.05, 0).unwrap();
        assert_eq!(p.cut, 1);
        assert_ne!(p.side(0), p.side(1));
    }

    #[test]
    fn k4_zero_tolerance() {
        let ids = ["a", "b", "c", "d"];
        let mut edges = Vec::new();
        for i in 0..4 {
            for j in i + 1..4 {
                edges.push((ids[i], ids[j], 1));
            }
        }
        let g = EndorsementGraph::from_edges(edges);
        let p = bisect(&g, 0.0, 3).unwrap();
        assert_eq!(p.cut, 4);
        assert_eq!(p.side_size(Side::X), 2);
    }

    #[test]
    fn rejects_bad_input() {
        let one = EndorsementGraph::from_parts(["solo"], Vec::<(String, String, u32)>::new());
        assert_eq!(bisect(&one, 0.05, 0), Err(Error::TooSmall(1)));
        let split = EndorsementGraph::from_edges([("a", "b", 2), ("c", "d", 2)]);
        assert_eq!(bisect(&split, 0.05, 0), Err(Error::Disconnected(2)));
        let edge = EndorsementGraph::from_edges([("a", "b", 2)]);
        assert!(matches!(bisect(&edge, 0.2, 0), Err(Error::Config(_))));
    }

    #[test]
    fn cut_size_counts_crossing_edges() {
        let g = EndorsementGraph::from_edges([
            ("a1", "a2", 2), ("a2", "a3", 2), ("a1", "a3", 2),
            ("b1", "b2", 2), ("b2", "b3", 2), ("b1", "b3", 2),
            ("a1", "b1", 3), ("a2", "b2", 2),
        ]);
        let sides: HashMap<String, Side> = g
            .ids()
            .iter()
            .map(|id| (id.clone(), if id.starts_with('a') { Side::X } else { Side::Y }))
            .collect();
        let p = Bipartition::from_assignment(&g, &sides).unwrap();
        assert_eq!(cut_size(&g, &p).unwrap(), CutSize { edges: 2, weight: 5 });

        let mut missing = sides.clone();
        missing.remove("b3");
        assert_eq!(
            Bipartition::from_assignment(&g, &missing),
            Err(Error::UnassignedNode("b3".into()))
        );
    }

    #[test]
    fn max_side_bounds() {
        assert_eq!(max_side_size(2, 0.05), 1);
        assert_eq!(max_side_size(3, 0.0), 2);
        assert_eq!(max_side_size(10, 0.05), 5);
        assert_eq!(max_side_size(100, 0.05), 55);
        assert_eq!(max_side_size(1000, 0.1), 600);
    }

    #[test]
    fn larger_clique_pairs_recover_exactly() {
        for (m, b) in [(4, 1), (4, 3), (20, 5), (50, 1), (80, 30)] {
            let g = clique_pair(m, b);
            let p = bisect(&g, DEFAULT_BALANCE_EPS, 11).unwrap();
            assert_eq!(p.cut, b, "m={m} b={b}");
            assert_eq!(p.side_size(Side::X), m);
        }
    }

    #[test]
    fn deterministic_for_seed_and_dump_format() {
        let g = clique_pair(40, 3);
        let a = bisect(&g, 0.05, 5).unwrap();
        assert_eq!(a, bisect(&g, 0.05, 5).unwrap());
        let dump = a.to_dump(&g);
        assert_eq!(dump.lines().count(), 80);
        assert!(dump.starts_with("a000 "));
    }
}
