//! Interaction records: the line-delimited JSON corpus format, time windows
//! and subtopic query filtering.
//!
//! One record per line:
//!
//! ```text
//! {"post_id":"p1","author_id":"alice","timestamp":1583020800,
//!  "tokens":[["vaccine","NOUN"],["is","VERB"]],"repost_of":["p0","bob"]}
//! ```
//!
//! `repost_of` is optional. Malformed lines are skipped and counted.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::{BufRead, Write};

use chrono::{Datelike, LocalResult, NaiveDate, TimeZone};
use chrono_tz::Tz;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    pub surface: String,
    pub pos: String,
}

impl Token {
    pub fn new(surface: impl Into<String>, pos: impl Into<String>) -> Self {
        Token {
            surface: surface.into(),
            pos: pos.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RepostRef {
    pub post_id: String,
    pub author_id: String,
}

/// One post. Reposts carry `repost_of` and usually no tokens of their own.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionRecord {
    pub post_id: String,
    pub author_id: String,
    /// UTC epoch seconds.
    pub timestamp: i64,
    pub tokens: Vec<Token>,
    pub repost_of: Option<RepostRef>,
}

impl InteractionRecord {
    pub fn is_repost(&self) -> bool {
        self.repost_of.is_some()
    }

    pub fn has_surface(&self, surface: &str) -> bool {
        self.tokens.iter().any(|t| t.surface == surface)
    }
}

/// Wire shape of one JSONL line.
#[derive(Serialize, Deserialize)]
struct RawRecord {
    post_id: String,
    author_id: String,
    timestamp: i64,
    #[serde(default)]
    tokens: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    repost_of: Option<(String, String)>,
}

impl RawRecord {
    fn into_record(self) -> Option<InteractionRecord> {
        if self.post_id.is_empty() || self.author_id.is_empty() {
            return None;
        }
        let repost_of = match self.repost_of {
            Some((_, author_id)) if author_id.is_empty() => return None,
            Some((post_id, author_id)) => Some(RepostRef { post_id, author_id }),
            None => None,
        };
        if self.tokens.is_empty() && repost_of.is_none() {
            return None;
        }
        Some(InteractionRecord {
            post_id: self.post_id,
            author_id: self.author_id,
            timestamp: self.timestamp,
            tokens: self
                .tokens
                .into_iter()
                .map(|(surface, pos)| Token { surface, pos })
                .collect(),
            repost_of,
        })
    }

    fn from_record(r: &InteractionRecord) -> Self {
        RawRecord {
            post_id: r.post_id.clone(),
            author_id: r.author_id.clone(),
            timestamp: r.timestamp,
            tokens: r
                .tokens
                .iter()
                .map(|t| (t.surface.clone(), t.pos.clone()))
                .collect(),
            repost_of: r
                .repost_of
                .as_ref()
                .map(|x| (x.post_id.clone(), x.author_id.clone())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedRecords {
    pub records: Vec<InteractionRecord>,
    /// Non-blank lines that failed to parse or violated a record invariant.
    pub malformed: usize,
}

/// Parse a JSONL stream. Blank lines are ignored; malformed lines are counted.
pub fn parse_records<R: BufRead>(reader: R) -> Result<ParsedRecords> {
    let mut records = Vec::new();
    let mut malformed = 0usize;
    let mut seen: HashSet<String> = HashSet::new();
    for line in reader.lines() {
        let line = line.map_err(|e| Error::Parse(e.to_string()))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let record = serde_json::from_str::<RawRecord>(line)
            .ok()
            .and_then(RawRecord::into_record);
        match record {
            Some(r) => {
                if !seen.insert(r.post_id.clone()) {
                    return Err(Error::DuplicatePostId(r.post_id));
                }
                records.push(r);
            }
            None => malformed += 1,
        }
    }
    if records.is_empty() {
        return Err(Error::EmptyInput { malformed });
    }
    Ok(ParsedRecords { records, malformed })
}

pub fn read_records(path: impl AsRef<std::path::Path>) -> Result<ParsedRecords> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_records(std::io::BufReader::new(file))
}

pub fn serialize_record(r: &InteractionRecord) -> String {
    serde_json::to_string(&RawRecord::from_record(r)).expect("record serializes")
}

pub fn write_records<'a, W, I>(mut out: W, records: I) -> std::io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a InteractionRecord>,
{
    for r in records {
        writeln!(out, "{}", serialize_record(r))?;
    }
    Ok(())
}

/// Half-open interval `[start, end)` of UTC epoch seconds.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: i64,
    pub end: i64,
    pub label: String,
}

impl TimeWindow {
    pub fn new(start: i64, end: i64, label: impl Into<String>) -> Result<Self> {
        if start >= end {
            return Err(Error::InvalidWindow(format!(
                "start {start} is not before end {end}"
            )));
        }
        Ok(TimeWindow {
            start,
            end,
            label: label.into(),
        })
    }

    pub fn contains(&self, timestamp: i64) -> bool {
        self.start <= timestamp && timestamp < self.end
    }

    /// Calendar month `year-month` with boundaries at local midnight in `tz`.
    pub fn month(year: i32, month: u32, tz: Tz) -> Result<Self> {
        let first = NaiveDate::from_ymd_opt(year, month, 1)
            .ok_or_else(|| Error::InvalidWindow(format!("{year}-{month:02}")))?;
        let next = if month == 12 {
            NaiveDate::from_ymd_opt(year + 1, 1, 1)
        } else {
            NaiveDate::from_ymd_opt(year, month + 1, 1)
        }
        .ok_or_else(|| Error::InvalidWindow(format!("{year}-{month:02}")))?;
        Self::new(
            local_midnight(first, tz)?,
            local_midnight(next, tz)?,
            format!("{year:04}-{month:02}"),
        )
    }

    /// Parse `YYYY-MM` or `start..end`, where each bound is epoch seconds or
    /// a `YYYY-MM-DD` date taken at local midnight in `tz`.
    pub fn parse(spec: &str, tz: Tz) -> Result<Self> {
        let spec = spec.trim();
        if let Some((a, b)) = spec.split_once("..") {
            let start = parse_bound(a, tz)?;
            let end = parse_bound(b, tz)?;
            return Self::new(start, end, spec);
        }
        let bad = || Error::InvalidWindow(format!("expected YYYY-MM or start..end, got {spec:?}"));
        let (y, m) = spec.split_once('-').ok_or_else(bad)?;
        if y.len() != 4 || m.len() != 2 {
            return Err(bad());
        }
        let year: i32 = y.parse().map_err(|_| bad())?;
        let month: u32 = m.parse().map_err(|_| bad())?;
        Self::month(year, month, tz)
    }
}

fn parse_bound(s: &str, tz: Tz) -> Result<i64> {
    let s = s.trim();
    if let Ok(secs) = s.parse::<i64>() {
        return Ok(secs);
    }
    let date = NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map_err(|_| Error::InvalidWindow(format!("bad window bound {s:?}")))?;
    local_midnight(date, tz)
}

fn local_midnight(date: NaiveDate, tz: Tz) -> Result<i64> {
    let naive = date.and_hms_opt(0, 0, 0).expect("midnight exists");
    match tz.from_local_datetime(&naive) {
        LocalResult::Single(t) => Ok(t.timestamp()),
        LocalResult::Ambiguous(a, _) => Ok(a.timestamp()),
        // Midnight skipped by a DST jump: the day starts at the first valid instant.
        LocalResult::None => {
            let shifted = naive + chrono::Duration::hours(1);
            tz.from_local_datetime(&shifted)
                .earliest()
                .map(|t| t.timestamp())
                .ok_or_else(|| Error::InvalidWindow(format!("no local midnight on {date}")))
        }
    }
}

pub fn parse_timezone(name: &str) -> Result<Tz> {
    name.parse::<Tz>()
        .map_err(|_| Error::UnknownTimezone(name.to_string()))
}

/// One calendar-month window for every month (in `tz`) holding a record,
/// in chronological order.
pub fn monthly_windows<'a, I>(records: I, tz: Tz) -> Vec<TimeWindow>
where
    I: IntoIterator<Item = &'a InteractionRecord>,
{
    let months: BTreeSet<(i32, u32)> = records
        .into_iter()
        .filter_map(|r| tz.timestamp_opt(r.timestamp, 0).single())
        .map(|t| (t.year(), t.month()))
        .collect();
    months
        .into_iter()
        .filter_map(|(y, m)| TimeWindow::month(y, m, tz).ok())
        .collect()
}

/// Records inside `window`; with a query, only those whose tokens contain the
/// query surface, plus reposts (transitively) of kept records in the window.
pub fn filter_window<'a, I>(
    records: I,
    window: &TimeWindow,
    query: Option<&str>,
) -> Vec<&'a InteractionRecord>
where
    I: IntoIterator<Item = &'a InteractionRecord>,
{
    let in_window: Vec<&InteractionRecord> = records
        .into_iter()
        .filter(|r| window.contains(r.timestamp))
        .collect();
    let Some(query) = query else {
        return in_window;
    };

    let mut reposts_of: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, r) in in_window.iter().enumerate() {
        if let Some(orig) = &r.repost_of {
            reposts_of.entry(orig.post_id.as_str()).or_default().push(i);
        }
    }
    let mut keep = vec![false; in_window.len()];
    let mut stack: Vec<usize> = Vec::new();
    for (i, r) in in_window.iter().enumerate() {
        if r.has_surface(query) {
            keep[i] = true;
            stack.push(i);
        }
    }
    while let Some(i) = stack.pop() {
        if let Some(children) = reposts_of.get(in_window[i].post_id.as_str()) {
            for &c in children {
                if !keep[c] {
                    keep[c] = true;
                    stack.push(c);
                }
            }
        }
    }
    in_window
        .into_iter()
        .zip(keep)
        .filter_map(|(r, k)| k.then_some(r))
        .collect()
}
