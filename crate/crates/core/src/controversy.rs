//! Random Walk Controversy score.
//!
//! Walks start uniformly on the non-absorbing nodes of one side. Each step
//! either restarts (probability `restart_prob`, back to the start
//! distribution) or moves to a uniformly random neighbor, and the walk stops
//! on entering one of the `k_top` highest-degree nodes of either side.
//! With `P_AB` the probability that a walk started on side A stops on side
//! B's absorbing set, the score is `P_XX * P_YY - P_XY * P_YX`.
//!
//! The exact route solves the absorbing chain; [`rwc_monte_carlo`] simulates
//! the same walk and serves as an independent check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bipartition::{Bipartition, Side};
use crate::error::{Error, Result};
use crate::graph::EndorsementGraph;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RwcConfig {
    /// Absorbing high-degree nodes per side.
    pub k_top: usize,
    pub restart_prob: f64,
    pub solver_tol: f64,
    pub max_iter: usize,
    /// Step to neighbors in proportion to edge weight instead of uniformly.
    pub weighted: bool,
}

impl Default for RwcConfig {
    fn default() -> Self {
        RwcConfig {
            k_top: 10,
            restart_prob: 0.15,
            solver_tol: 1e-10,
            max_iter: 100_000,
            weighted: false,
        }
    }
}

impl RwcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_top == 0 {
            return Err(Error::Config("k_top must be at least 1".into()));
        }
        if !(self.restart_prob > 0.0 && self.restart_prob < 1.0) {
            return Err(Error::Config(format!(
                "restart probability {} outside (0, 1)",
                self.restart_prob
            )));
        }
        if self.solver_tol.is_nan() || self.solver_tol <= 0.0 || self.max_iter == 0 {
            return Err(Error::Config("solver tolerance and max_iter must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RwcResult {
    pub p_xx: f64,
    pub p_xy: f64,
    pub p_yy: f64,
    pub p_yx: f64,
    pub score: f64,
}

impl RwcResult {
    pub fn from_probabilities(p_xx: f64, p_xy: f64, p_yy: f64, p_yx: f64) -> Self {
        RwcResult {
            p_xx,
            p_xy,
            p_yy,
            p_yx,
            score: p_xx * p_yy - p_xy * p_yx,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Absorption {
    /// Probability of stopping in the start side's absorbing set.
    pub p_same: f64,
    pub p_cross: f64,
}

/// The `k_top` highest-degree nodes of `side`, ties by ascending id.
pub fn high_degree_nodes(
    g: &EndorsementGraph,
    p: &Bipartition,
    side: Side,
    k_top: usize,
) -> Result<Vec<usize>> {
    let mut members: Vec<usize> = p.members(side).collect();
    if members.len() <= k_top {
        return Err(Error::SideTooSmall {
            side: if side == Side::X { 'X' } else { 'Y' },
            size: members.len(),
            k_top,
        });
    }
    // Node indices already follow id order.
    members.sort_by_key(|&u| (std::cmp::Reverse(g.degree(u)), u));
    members.truncate(k_top);
    Ok(members)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Role {
    Transient,
    Absorbing(Side),
}

/// Absorbing sets and start distributions shared by both estimators.
struct WalkSetup {
    role: Vec<Role>,
    starts: [Vec<usize>; 2],
}

impl WalkSetup {
    fn new(g: &EndorsementGraph, p: &Bipartition, cfg: &RwcConfig) -> Result<Self> {
        cfg.validate()?;
        if p.sides().len() != g.node_count() {
            return Err(Error::Config("partition does not match graph".into()));
        }
        let mut role = vec![Role::Transient; g.node_count()];
        for side in [Side::X, Side::Y] {
            for u in high_degree_nodes(g, p, side, cfg.k_top)? {
                role[u] = Role::Absorbing(side);
            }
        }
        let starts_of = |side: Side| -> Vec<usize> {
            p.members(side)
                .filter(|&u| role[u] == Role::Transient)
                .collect()
        };
        let starts = [starts_of(Side::X), starts_of(Side::Y)];
        Ok(WalkSetup { role, starts })
    }

    fn starts(&self, side: Side) -> Result<&[usize]> {
        let s = &self.starts[side_slot(side)];
        if s.is_empty() {
            return Err(Error::DegenerateStart);
        }
        Ok(s)
    }
}

fn side_slot(side: Side) -> usize {
    match side {
        Side::X => 0,
        Side::Y => 1,
    }
}

/// Exact absorption probabilities for walks started on `start_side`.
pub fn absorption_probabilities(
    g: &EndorsementGraph,
    p: &Bipartition,
    cfg: &RwcConfig,
    start_side: Side,
) -> Result<Absorption> {
    let setup = WalkSetup::new(g, p, cfg)?;
    let solution = solve_excursions(g, &setup, cfg)?;
    solution.absorption(&setup, start_side)
}

/// Per-node excursion probabilities from one start before the next restart:
/// absorbed on X, absorbed on Y, or restarted.
struct Excursions {
    to_x: Vec<f64>,
    to_y: Vec<f64>,
    restart: Vec<f64>,
}

impl Excursions {
    fn absorption(&self, setup: &WalkSetup, start_side: Side) -> Result<Absorption> {
        let starts = setup.starts(start_side)?;
        let mean = |v: &[f64]| starts.iter().map(|&u| v[u]).sum::<f64>() / starts.len() as f64;
        let (a_x, a_y, a_r) = (mean(&self.to_x), mean(&self.to_y), mean(&self.restart));
        // Restarts repeat the same excursion, so absorption odds are the
        // excursion odds renormalized by the chance of ending the walk.
        let ends = 1.0 - a_r;
        let (p_x, p_y) = (a_x / ends, a_y / ends);
        Ok(match start_side {
            Side::X => Absorption { p_same: p_x, p_cross: p_y },
            Side::Y => Absorption { p_same: p_y, p_cross: p_x },
        })
    }
}

/// Gauss–Seidel on the three excursion systems at once.
///
/// Each system is a `(1 - restart)`-contraction in the max norm, so a sweep
/// changing no entry by more than `d` leaves an error of at most
/// `d (1 - a) / a`; iteration stops when that bound falls below `solver_tol`.
fn solve_excursions(g: &EndorsementGraph, setup: &WalkSetup, cfg: &RwcConfig) -> Result<Excursions> {
    let n = g.node_count();
    let alpha = cfg.restart_prob;
    let move_p = 1.0 - alpha;
    let transient: Vec<usize> = (0..n).filter(|&u| setup.role[u] == Role::Transient).collect();
    let inv_deg: Vec<f64> = (0..n)
        .map(|u| {
            let d = if cfg.weighted { g.weighted_degree(u) as f64 } else { g.degree(u) as f64 };
            if d > 0.0 { 1.0 / d } else { 0.0 }
        })
        .collect();

    let mut to_x = vec![0.0; n];
    let mut to_y = vec![0.0; n];
    let mut restart = vec![0.0; n];
    let stop_below = cfg.solver_tol * alpha / move_p;

    for _ in 0..cfg.max_iter {
        let mut delta: f64 = 0.0;
        for &u in &transient {
            let (mut sx, mut sy, mut sr) = (0.0, 0.0, 0.0);
            for &(v, w) in g.neighbors(u) {
                let share = if cfg.weighted { f64::from(w) } else { 1.0 };
                match setup.role[v] {
                    Role::Absorbing(Side::X) => sx += share,
                    Role::Absorbing(Side::Y) => sy += share,
                    Role::Transient => {
                        sx += share * to_x[v];
                        sy += share * to_y[v];
                        sr += share * restart[v];
                    }
                }
            }
            let nx = move_p * sx * inv_deg[u];
            let ny = move_p * sy * inv_deg[u];
            // Isolated nodes can only restart.
            let nr = if inv_deg[u] > 0.0 { alpha + move_p * sr * inv_deg[u] } else { 1.0 };
            delta = delta
                .max((nx - to_x[u]).abs())
                .max((ny - to_y[u]).abs())
                .max((nr - restart[u]).abs());
            to_x[u] = nx;
            to_y[u] = ny;
            restart[u] = nr;
        }
        if delta <= stop_below {
            return Ok(Excursions { to_x, to_y, restart });
        }
    }
    Err(Error::NoConvergence(cfg.max_iter))
}

/// Exact RWC from both start sides.
pub fn rwc_score(g: &EndorsementGraph, p: &Bipartition, cfg: &RwcConfig) -> Result<RwcResult> {
    let setup = WalkSetup::new(g, p, cfg)?;
    let solution = solve_excursions(g, &setup, cfg)?;
    let from_x = solution.absorption(&setup, Side::X)?;
    let from_y = solution.absorption(&setup, Side::Y)?;
    Ok(RwcResult::from_probabilities(
        from_x.p_same,
        from_x.p_cross,
        from_y.p_same,
        from_y.p_cross,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub result: RwcResult,
    /// Walks simulated per start side.
    pub n_walks: u64,
    /// Binomial standard errors of `p_xx` and `p_yy`.
    pub std_err_x: f64,
    pub std_err_y: f64,
}

const WALKS_PER_SHARD: u64 = 4096;

/// Simulate `n_walks` walks per start side.
///
/// Walks are split into fixed-size shards, each with its own ChaCha stream
/// keyed by `(seed, side, shard)`, so the estimate does not depend on the
/// thread count.
pub fn rwc_monte_carlo(
    g: &EndorsementGraph,
    p: &Bipartition,
    cfg: &RwcConfig,
    n_walks: u64,
    seed: u64,
) -> Result<McEstimate> {
    if n_walks == 0 {
        return Err(Error::Config("n_walks must be at least 1".into()));
    }
    let setup = WalkSetup::new(g, p, cfg)?;
    let sampler = NeighborSampler::new(g, cfg.weighted);
    let mut same = [0u64; 2];
    for side in [Side::X, Side::Y] {
        let starts = setup.starts(side)?;
        let shards = n_walks.div_ceil(WALKS_PER_SHARD);
        same[side_slot(side)] = (0..shards)
            .into_par_iter()
            .map(|shard| {
                let walks = WALKS_PER_SHARD.min(n_walks - shard * WALKS_PER_SHARD);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(((side_slot(side) as u64) << 48) | shard);
                (0..walks)
                    .filter(|_| walk(&setup, &sampler, starts, cfg.restart_prob, &mut rng) == side)
                    .count() as u64
            })
            .sum();
    }
    let n = n_walks as f64;
    let p_xx = same[0] as f64 / n;
    let p_yy = same[1] as f64 / n;
    let se = |p: f64| (p * (1.0 - p) / n).sqrt();
    Ok(McEstimate {
        result: RwcResult::from_probabilities(p_xx, 1.0 - p_xx, p_yy, 1.0 - p_yy),
        n_walks,
        std_err_x: se(p_xx),
        std_err_y: se(p_yy),
    })
}

/// One walk; returns the side whose absorbing set stopped it.
fn walk(
    setup: &WalkSetup,
    sampler: &NeighborSampler,
    starts: &[usize],
    alpha: f64,
    rng: &mut ChaCha8Rng,
) -> Side {
    let mut at = starts[rng.gen_range(0..starts.len())];
    loop {
        if rng.gen::<f64>() < alpha {
            at = starts[rng.gen_range(0..starts.len())];
            continue;
        }
        let Some(next) = sampler.sample(at, rng) else {
            at = starts[rng.gen_range(0..starts.len())];
            continue;
        };
        match setup.role[next] {
            Role::Absorbing(side) => return side,
            Role::Transient => at = next,
        }
    }
}

enum NeighborSampler<'g> {
    Uniform(&'g EndorsementGraph),
    /// Cumulative edge weights per node.
    Weighted(&'g EndorsementGraph, Vec<Vec<u64>>),
}

impl<'g> NeighborSampler<'g> {
    fn new(g: &'g EndorsementGraph, weighted: bool) -> Self {
        if !weighted {
            return NeighborSampler::Uniform(g);
        }
        let cumulative = (0..g.node_count())
            .map(|u| {
                g.neighbors(u)
                    .iter()
                    .scan(0u64, |acc, &(_, w)| {
                        *acc += u64::from(w);
                        Some(*acc)
                    })
                    .collect()
            })
            .collect();
        NeighborSampler::Weighted(g, cumulative)
    }

    fn sample(&self, u: usize, rng: &mut ChaCha8Rng) -> Option<usize> {
        match self {
            NeighborSampler::Uniform(g) => {
                let nbrs = g.neighbors(u);
                (!nbrs.is_empty()).then(|| nbrs[rng.gen_range(0..nbrs.len())].0)
            }
            NeighborSampler::Weighted(g, cumulative) => {
                let total = *cumulative[u].last()?;
                let r = rng.gen_range(0..total);
                let i = cumulative[u].partition_point(|&c| c <= r);
                Some(g.neighbors(u)[i].0)
            }
        }
    }
}
