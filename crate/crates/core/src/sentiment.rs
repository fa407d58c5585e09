//! Lexicon sentiment: per-record mean polarity of matched tokens, and
//! population mean/std over a record set.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{InteractionRecord, Token};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PolarityLexicon {
    polarity: HashMap<String, f64>,
}

impl PolarityLexicon {
    pub fn new<I, S>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut polarity = HashMap::new();
        for (surface, value) in entries {
            let surface = surface.into();
            if surface.is_empty() {
                return Err(Error::Config("empty lexicon surface".into()));
            }
            if !(-1.0..=1.0).contains(&value) {
                return Err(Error::Config(format!(
                    "polarity {value} for {surface:?} outside [-1, 1]"
                )));
            }
            polarity.insert(surface, value);
        }
        Ok(PolarityLexicon { polarity })
    }

    /// `surface<TAB>polarity` per line; blank lines and `#` lines skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || Error::Parse(format!("lexicon line {}: {line:?}", i + 1));
            let (surface, value) = line.split_once('\t').ok_or_else(bad)?;
            let value: f64 = value.trim().parse().map_err(|_| bad())?;
            entries.push((surface.to_string(), value));
        }
        Self::new(entries)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn get(&self, surface: &str) -> Option<f64> {
        self.polarity.get(surface).copied()
    }

    pub fn len(&self) -> usize {
        self.polarity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polarity.is_empty()
    }

    pub fn negated(&self) -> Self {
        PolarityLexicon {
            polarity: self.polarity.iter().map(|(k, v)| (k.clone(), -v)).collect(),
        }
    }
}

/// Mean polarity of the tokens found in the lexicon; `None` if none match.
pub fn score_text(tokens: &[Token], lex: &PolarityLexicon) -> Option<f64> {
    let (sum, count) = tokens
        .iter()
        .filter_map(|t| lex.get(&t.surface))
        .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| (sum / count as f64).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SentimentSummary {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub matched_count: usize,
}

/// Mergeable `(count, sum, sum of squares)` accumulator.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: usize,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(self, other: Moments) -> Moments {
        Moments {
            count: self.count + other.count,
            sum: self.sum + other.sum,
            sum_sq: self.sum_sq + other.sum_sq,
        }
    }

    pub fn summary(&self) -> Result<SentimentSummary> {
        if self.count == 0 {
            return Err(Error::AllUnmatched);
        }
        let n = self.count as f64;
        let mean = self.sum / n;
        let var = (self.sum_sq / n - mean * mean).max(0.0);
        Ok(SentimentSummary {
            mean,
            std: var.sqrt(),
            matched_count: self.count,
        })
    }
}

pub fn aggregate_sentiment<'a, I>(records: I, lex: &PolarityLexicon) -> Result<SentimentSummary>
where
    I: IntoIterator<Item = &'a InteractionRecord>,
{
    let mut m = Moments::default();
    for score in records.into_iter().filter_map(|r| score_text(&r.tokens, lex)) {
        m.push(score);
    }
    m.summary()
}
