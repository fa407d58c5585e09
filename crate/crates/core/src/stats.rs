//! Correlation between per-cell indicators and threshold grouping of reports.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};
use crate::report::ControversyReport;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub r: f64,
    /// Two-tailed p-value of `r` under the null of zero correlation.
    pub p: f64,
    pub n: usize,
}

fn centered_sums(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch(xs.len(), ys.len()));
    }
    let n = xs.len();
    if n < 3 {
        return Err(Error::TooFew(n));
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let constant = |v: &[f64]| v.iter().all(|x| *x == v[0]);
    if sxx == 0.0 || syy == 0.0 || constant(xs) || constant(ys) {
        return Err(Error::ZeroVariance);
    }
    Ok((sxx, syy, sxy))
}

fn coefficient(sxx: f64, syy: f64, sxy: f64) -> f64 {
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// Sample Pearson coefficient with a Student-t p-value (`n - 2` degrees of
/// freedom) computed through the regularized incomplete beta function.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<Correlation> {
    let (sxx, syy, sxy) = centered_sums(xs, ys)?;
    let r = coefficient(sxx, syy, sxy);
    let n = xs.len();
    Ok(Correlation {
        r,
        p: t_test_p_value(r, n),
        n,
    })
}

/// Two-tailed p for `t = r sqrt((n-2)/(1-r^2))`:
/// `P(|T| > t) = I_{df/(df+t^2)}(df/2, 1/2)`, and `df/(df+t^2) = 1 - r^2`.
fn t_test_p_value(r: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    let x = 1.0 - r * r;
    if x <= 0.0 {
        return 0.0;
    }
    beta_reg(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

/// Permutation p-value: share of `rounds` shuffles of `ys` whose |r| reaches
/// the observed |r|, with the usual +1 correction.
pub fn pearson_permutation(xs: &[f64], ys: &[f64], rounds: usize, seed: u64) -> Result<Correlation> {
    let observed = pearson(xs, ys)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled = ys.to_vec();
    let mut hits = 0usize;
    for _ in 0..rounds {
        shuffled.shuffle(&mut rng);
        let (sxx, syy, sxy) = centered_sums(xs, &shuffled)?;
        if coefficient(sxx, syy, sxy).abs() >= observed.r.abs() - 1e-12 {
            hits += 1;
        }
    }
    Ok(Correlation {
        p: (hits + 1) as f64 / (rounds + 1) as f64,
        ..observed
    })
}

/// Per-cell values of one indicator, keyed by `(subtopic, window)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IndicatorVector {
    pairs: Vec<(String, String, f64)>,
}

impl IndicatorVector {
    pub fn new(pairs: Vec<(String, String, f64)>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (subtopic, window, value) in &pairs {
            if !value.is_finite() {
                return Err(Error::Config(format!("non-finite value for {subtopic}/{window}")));
            }
            if !seen.insert((subtopic, window)) {
                return Err(Error::Config(format!("duplicate cell {subtopic}/{window}")));
            }
        }
        Ok(IndicatorVector { pairs })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Values of `self` and `other` on the cells both define, in `self` order.
    pub fn aligned(&self, other: &IndicatorVector) -> (Vec<f64>, Vec<f64>) {
        let lookup: BTreeMap<(&str, &str), f64> = other
            .pairs
            .iter()
            .map(|(s, w, v)| ((s.as_str(), w.as_str()), *v))
            .collect();
        self.pairs
            .iter()
            .filter_map(|(s, w, v)| lookup.get(&(s.as_str(), w.as_str())).map(|o| (*v, *o)))
            .unzip()
    }
}

/// Indicators of the scored cells: RWC, node count, sentiment mean and std.
pub struct Indicators {
    pub rwc: IndicatorVector,
    pub users: IndicatorVector,
    pub sentiment_mean: IndicatorVector,
    pub sentiment_std: IndicatorVector,
}

pub fn indicators(reports: &[ControversyReport]) -> Result<Indicators> {
    let mut rwc = Vec::new();
    let mut users = Vec::new();
    let mut mean = Vec::new();
    let mut std = Vec::new();
    for r in reports {
        let Some(result) = &r.rwc else { continue };
        let key = || (r.subtopic.clone(), r.window.clone());
        let (s, w) = key();
        rwc.push((s, w, result.score));
        let (s, w) = key();
        users.push((s, w, r.node_count as f64));
        if let Some(senti) = &r.sentiment {
            let (s, w) = key();
            mean.push((s, w, senti.mean));
            let (s, w) = key();
            std.push((s, w, senti.std));
        }
    }
    Ok(Indicators {
        rwc: IndicatorVector::new(rwc)?,
        users: IndicatorVector::new(users)?,
        sentiment_mean: IndicatorVector::new(mean)?,
        sentiment_std: IndicatorVector::new(std)?,
    })
}

/// Correlation of RWC with each other indicator; cells where it cannot be
/// computed (too few points, constant input) are left out.
pub fn controversy_correlations(reports: &[ControversyReport]) -> Result<BTreeMap<String, Correlation>> {
    let ind = indicators(reports)?;
    let mut out = BTreeMap::new();
    for (name, other) in [
        ("users", &ind.users),
        ("sentiment_mean", &ind.sentiment_mean),
        ("sentiment_std", &ind.sentiment_std),
    ] {
        let (xs, ys) = ind.rwc.aligned(other);
        if let Ok(c) = pearson(&xs, &ys) {
            out.insert(name.to_string(), c);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    /// A cell is highly controversial when its score is strictly above this.
    pub score: f64,
    /// Large subtopics have at least this many nodes.
    pub size: usize,
    /// Negative subtopics have sentiment mean strictly below this.
    pub sentiment: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            score: 0.3,
            size: 10_000,
            sentiment: -0.5,
        }
    }
}

impl Thresholds {
    pub fn is_high(&self, score: f64) -> bool {
        score > self.score
    }

    pub fn is_large(&self, node_count: usize) -> bool {
        node_count >= self.size
    }

    pub fn is_negative(&self, mean: f64) -> bool {
        mean < self.sentiment
    }
}

/// Report groupings, each keyed by window label.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    /// Scored cells above the controversy threshold.
    pub high: BTreeMap<String, Vec<String>>,
    /// Scored cells at or below it.
    pub low: BTreeMap<String, Vec<String>>,
    /// Cells without a score: under-sized graphs or per-cell failures.
    pub dashed: BTreeMap<String, Vec<String>>,
    pub large_high: BTreeMap<String, Vec<String>>,
    pub large_low: BTreeMap<String, Vec<String>>,
    /// Subtopics with sentiment mean below the sentiment threshold, with
    /// their score when one exists.
    pub negative: BTreeMap<String, Vec<(String, Option<f64>)>>,
}

pub fn classify_subtopics(reports: &[ControversyReport], t: &Thresholds) -> Classification {
    let mut c = Classification::default();
    let push = |m: &mut BTreeMap<String, Vec<String>>, r: &ControversyReport| {
        m.entry(r.window.clone()).or_default().push(r.subtopic.clone());
    };
    for r in reports {
        match &r.rwc {
            Some(res) => {
                let high = t.is_high(res.score);
                push(if high { &mut c.high } else { &mut c.low }, r);
                if t.is_large(r.node_count) {
                    push(if high { &mut c.large_high } else { &mut c.large_low }, r);
                }
            }
            None => push(&mut c.dashed, r),
        }
        if let Some(s) = &r.sentiment {
            if t.is_negative(s.mean) {
                c.negative
                    .entry(r.window.clone())
                    .or_default()
                    .push((r.subtopic.clone(), r.rwc.map(|x| x.score)));
            }
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controversy::RwcResult;
    use crate::sentiment::SentimentSummary;

    #[test]
    fn perfect_correlations() {
        let xs = [1.0, 2.5, 3.0, 7.0, 11.0];
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        let c = pearson(&xs, &xs).unwrap();
        assert_eq!((c.r, c.p), (1.0, 0.0));
        let c = pearson(&xs, &neg).unwrap();
        assert_eq!((c.r, c.p), (-1.0, 0.0));
    }

    #[test]
    fn known_small_case() {
        // r = 0.8 exactly; p from scipy.stats.pearsonr.
        let c = pearson(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 1.0, 4.0, 3.0, 5.0]).unwrap();
        assert!((c.r - 0.8).abs() < 1e-12);
        assert!((c.p - 0.10408803866182799).abs() < 1e-9);
    }

    #[test]
    fn error_cases() {
        assert_eq!(pearson(&[1.0, 2.0], &[1.0, 2.0]), Err(Error::TooFew(2)));
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0]), Err(Error::LengthMismatch(3, 2)));
        assert_eq!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::ZeroVariance));
    }

    #[test]
    fn permutation_agrees_roughly_with_t_test() {
        let xs: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (x * 1.7).sin() * 10.0 + x * 0.3).collect();
        let exact = pearson(&xs, &ys).unwrap();
        let perm = pearson_permutation(&xs, &ys, 4000, 1).unwrap();
        assert_eq!(perm.r, exact.r);
        assert!((perm.p - exact.p).abs() < 0.05, "{perm:?} {exact:?}");
    }

    fn report(subtopic: &str, window: &str, nodes: usize, score: Option<f64>, senti: Option<f64>) -> ControversyReport {
        ControversyReport {
            subtopic: subtopic.into(),
            window: window.into(),
            record_count: 0,
            node_count: nodes,
            rwc: score.map(|s| RwcResult { p_xx: 0.0, p_xy: 0.0, p_yy: 0.0, p_yx: 0.0, score: s }),
            sentiment: senti.map(|m| SentimentSummary { mean: m, std: 0.1, matched_count: 5 }),
            error: None,
        }
    }

    #[test]
    fn classification_thresholds_are_strict() {
        let reports = vec![
            report("vaccine", "Jul", 20_000, Some(0.801), Some(-0.6)),
            report("all", "Aug", 900, Some(0.298), None),
            report("edge", "Aug", 10_000, Some(0.3), Some(-0.5)),
            report("goto", "Aug", 12, None, Some(-0.9)),
        ];
        let c = classify_subtopics(&reports, &Thresholds::default());
        assert_eq!(c.high["Jul"], vec!["vaccine"]);
        assert_eq!(c.low["Aug"], vec!["all", "edge"]);
        assert_eq!(c.dashed["Aug"], vec!["goto"]);
        assert_eq!(c.large_high["Jul"], vec!["vaccine"]);
        assert_eq!(c.large_low["Aug"], vec!["edge"]);
        assert_eq!(c.negative["Jul"], vec![("vaccine".to_string(), Some(0.801))]);
        assert_eq!(c.negative["Aug"], vec![("goto".to_string(), None)]);

        // Each report lands in exactly one controversy group.
        let total: usize = [&c.high, &c.low, &c.dashed]
            .iter()
            .flat_map(|m| m.values())
            .map(Vec::len)
            .sum();
        assert_eq!(total, reports.len());
    }

    #[test]
    fn indicator_vectors() {
        assert!(IndicatorVector::new(vec![("a".into(), "w".into(), f64::NAN)]).is_err());
        assert!(IndicatorVector::new(vec![("a".into(), "w".into(), 1.0), ("a".into(), "w".into(), 2.0)]).is_err());
        let reports = vec![
            report("a", "w", 900, Some(0.1), Some(0.2)),
            report("b", "w", 1500, Some(0.5), Some(-0.1)),
            report("c", "w", 3000, Some(0.7), Some(-0.3)),
            report("d", "w", 20, None, Some(0.0)),
        ];
        let corr = controversy_correlations(&reports).unwrap();
        assert_eq!(corr["users"].n, 3);
        assert!(corr["sentiment_mean"].r < -0.9);
        // Constant std is skipped rather than failing the batch.
        assert!(!corr.contains_key("sentiment_std"));
    }
}
