//! Phase 1: shortlist candidate subtopics by token frequency after noun and
//! stopword filtering.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::InteractionRecord;

pub const DEFAULT_TOP_N: usize = 50;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StopwordConfig {
    /// Ordinary stopwords.
    pub standard: HashSet<String>,
    /// Corpus-specific stopwords: the topic itself, news and announcement
    /// vocabulary, places, names, times, filler.
    pub custom: HashSet<String>,
    pub noun_pos_tags: HashSet<String>,
}

impl StopwordConfig {
    pub fn new<I, S>(noun_pos_tags: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        StopwordConfig {
            standard: HashSet::new(),
            custom: HashSet::new(),
            noun_pos_tags: noun_pos_tags.into_iter().map(Into::into).collect(),
        }
    }

    pub fn is_stopword(&self, surface: &str) -> bool {
        self.standard.contains(surface) || self.custom.contains(surface)
    }

    pub fn accepts(&self, surface: &str, pos: &str) -> bool {
        self.noun_pos_tags.contains(pos) && !self.is_stopword(surface)
    }

    pub fn validate(&self) -> Result<()> {
        let empty = self
            .standard
            .iter()
            .chain(&self.custom)
            .chain(&self.noun_pos_tags)
            .any(|s| s.is_empty());
        if empty {
            return Err(Error::Config("empty stopword or POS tag entry".into()));
        }
        Ok(())
    }
}

/// Parse a stopword list: one surface per line, `#` starts a comment.
pub fn parse_stopword_list(text: &str) -> HashSet<String> {
    text.lines()
        .map(|line| line.split_once('#').map_or(line, |(head, _)| head).trim())
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

pub fn read_stopword_file(path: impl AsRef<Path>) -> Result<HashSet<String>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_stopword_list(&text))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountMode {
    /// Every accepted token occurrence counts.
    #[default]
    Occurrences,
    /// A token counts once per record.
    Documents,
}

impl std::str::FromStr for CountMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "occurrences" => Ok(CountMode::Occurrences),
            "documents" => Ok(CountMode::Documents),
            other => Err(Error::Config(format!("unknown count mode {other:?}"))),
        }
    }
}

pub type FrequencyMap = HashMap<String, u64>;

pub fn extract_candidate_tokens<'a, I>(records: I, cfg: &StopwordConfig) -> FrequencyMap
where
    I: IntoIterator<Item = &'a InteractionRecord>,
{
    extract_candidate_tokens_with(records, cfg, CountMode::Occurrences)
}

pub fn extract_candidate_tokens_with<'a, I>(
    records: I,
    cfg: &StopwordConfig,
    mode: CountMode,
) -> FrequencyMap
where
    I: IntoIterator<Item = &'a InteractionRecord>,
{
    let mut freq = FrequencyMap::new();
    let mut seen: HashSet<&str> = HashSet::new();
    for r in records {
        seen.clear();
        for t in &r.tokens {
            if !cfg.accepts(&t.surface, &t.pos) {
                continue;
            }
            if mode == CountMode::Documents && !seen.insert(t.surface.as_str()) {
                continue;
            }
            *freq.entry(t.surface.clone()).or_insert(0) += 1;
        }
    }
    freq
}

/// Merge shard counts.
pub fn merge_frequencies(mut into: FrequencyMap, other: FrequencyMap) -> FrequencyMap {
    for (k, v) in other {
        *into.entry(k).or_insert(0) += v;
    }
    into
}

/// The `n` most frequent tokens, count descending then code-point ascending.
pub fn top_n_subtopics(freq: &FrequencyMap, n: usize) -> Vec<String> {
    let mut entries: Vec<(&String, u64)> = freq.iter().map(|(k, v)| (k, *v)).collect();
    entries.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    entries
        .into_iter()
        .take(n)
        .map(|(k, _)| k.clone())
        .collect()
}

/// Sorted view of a frequency map, handy for dumps and tests.
pub fn sorted_frequencies(freq: &FrequencyMap) -> BTreeMap<String, u64> {
    freq.iter().map(|(k, v)| (k.clone(), *v)).collect()
}
