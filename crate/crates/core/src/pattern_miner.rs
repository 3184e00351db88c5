//! Mining `[A1] context [A2]` text dependencies from retrieved documents.
//!
//! For each clean tuple the miner queries both values, finds every
//! co-occurrence within `max_gap` tokens and records the intervening tokens.
//! A context is credited to every suffix of the intervening run, so
//! `YuZhou is the principal of Harbin` supports `of`, `principal of`,
//! `the principal of` and `is the principal of`, each once per document.
//! Only the longest frequent contexts are kept: a frequent context is
//! dropped when a longer frequent context of the same direction ends with it.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extractor::{Dictionary, Extraction};
use crate::search_provider::{query_all, query_with_retries, Document, Query, SearchProvider};
use crate::tabular::Table;
use crate::text::{find_all, token_strings, Span};

pub const DEFAULT_MAX_GAP: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `[attr1] context [attr2]`
    Attr1First,
    /// `[attr2] context [attr1]`
    Attr2First,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pattern {
    pub attr1: String,
    pub attr2: String,
    pub context: Vec<String>,
    pub direction: Direction,
    pub support: usize,
}

impl Pattern {
    /// Attribute whose value comes first in text.
    pub fn leading(&self) -> &str {
        match self.direction {
            Direction::Attr1First => &self.attr1,
            Direction::Attr2First => &self.attr2,
        }
    }

    pub fn trailing(&self) -> &str {
        match self.direction {
            Direction::Attr1First => &self.attr2,
            Direction::Attr2First => &self.attr1,
        }
    }

    pub fn involves(&self, a: &str, b: &str) -> bool {
        (self.attr1 == a && self.attr2 == b) || (self.attr1 == b && self.attr2 == a)
    }

    pub fn context_text(&self) -> String {
        self.context.join(" ")
    }
}

impl std::fmt::Display for Pattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{}] {} [{}] (support {})",
            self.leading(),
            self.context_text(),
            self.trailing(),
            self.support
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MineOptions {
    /// `None` means half the documents examined, rounded up.
    pub min_support: Option<usize>,
    pub sample: usize,
    pub pages: usize,
    pub max_gap: usize,
    pub retries: usize,
    pub max_in_flight: usize,
}

impl Default for MineOptions {
    fn default() -> Self {
        MineOptions {
            min_support: None,
            sample: 10,
            pages: 5,
            max_gap: DEFAULT_MAX_GAP,
            retries: 2,
            max_in_flight: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MineOutcome {
    pub patterns: Vec<Pattern>,
    pub documents_examined: usize,
    pub min_support: usize,
    /// Every context with its support, before thresholding.
    pub support_table: BTreeMap<(Vec<String>, Direction), usize>,
}

/// Rows complete on both attributes, in row order, at most `sample` of them.
pub fn clean_tuples(table: &Table, a1: &str, a2: &str, sample: usize) -> Result<Vec<(String, String)>> {
    let c1 = table.require_column(a1)?;
    let c2 = table.require_column(a2)?;
    Ok((0..table.num_rows())
        .filter_map(|r| Some((table.get(r, c1)?.to_string(), table.get(r, c2)?.to_string())))
        .take(sample)
        .collect())
}

fn spans_of(tokens: &[String], value: &[String]) -> Vec<Span> {
    if value.is_empty() {
        return Vec::new();
    }
    find_all(tokens, value)
        .into_iter()
        .map(|s| Span::new(s, s + value.len()))
        .collect()
}

/// Every (intervening tokens, direction) between an occurrence of `v1` and of `v2`.
fn cooccurrences<'a>(
    tokens: &'a [String],
    v1: &[String],
    v2: &[String],
    max_gap: usize,
) -> Vec<(&'a [String], Direction)> {
    let s1 = spans_of(tokens, v1);
    let s2 = spans_of(tokens, v2);
    let mut out = Vec::new();
    for a in &s1 {
        for b in &s2 {
            let (first, second, dir) = if a.end <= b.start {
                (a, b, Direction::Attr1First)
            } else if b.end <= a.start {
                (b, a, Direction::Attr2First)
            } else {
                continue;
            };
            let gap = second.start - first.end;
            if (1..=max_gap).contains(&gap) {
                out.push((&tokens[first.end..second.start], dir));
            }
        }
    }
    out
}

fn mining_queries(tuples: &[(String, String)], pages: usize) -> Result<Vec<Query>> {
    tuples
        .iter()
        .map(|(v1, v2)| Query::new(vec![v1.clone(), v2.clone()], pages))
        .collect()
}

fn retrieve(
    provider: &dyn SearchProvider,
    tuples: &[(String, String)],
    opts: &MineOptions,
) -> Result<Vec<Vec<Document>>> {
    let queries = mining_queries(tuples, opts.pages)?;
    query_all(provider, &queries, opts.max_in_flight, opts.retries)
        .into_iter()
        .collect()
}

pub fn mine_patterns(
    provider: &dyn SearchProvider,
    table: &Table,
    pair: (&str, &str),
    opts: &MineOptions,
) -> Result<MineOutcome> {
    let (a1, a2) = pair;
    if a1 == a2 {
        return Err(Error::Config(format!("pattern pair needs two distinct attributes, got {a1} twice")));
    }
    if opts.min_support == Some(0) {
        return Err(Error::Config("minimum support must be at least 1".into()));
    }
    let tuples = clean_tuples(table, a1, a2, opts.sample)?;
    if tuples.is_empty() {
        return Err(Error::NoMiningEvidence(a1.to_string(), a2.to_string()));
    }
    let results = retrieve(provider, &tuples, opts)?;

    // support = number of distinct documents exhibiting the context
    let mut docs_for: BTreeMap<(Vec<String>, Direction), BTreeSet<String>> = BTreeMap::new();
    let mut examined = 0;
    for ((v1, v2), docs) in tuples.iter().zip(&results) {
        let t1 = token_strings(v1);
        let t2 = token_strings(v2);
        examined += docs.len();
        for doc in docs {
            let tokens = token_strings(&doc.text);
            for (between, dir) in cooccurrences(&tokens, &t1, &t2, opts.max_gap) {
                for k in 0..between.len() {
                    docs_for
                        .entry((between[k..].to_vec(), dir))
                        .or_default()
                        .insert(doc.id.clone());
                }
            }
        }
    }
    let min_support = opts.min_support.unwrap_or_else(|| examined.div_ceil(2).max(1));
    let support_table: BTreeMap<_, _> = docs_for.into_iter().map(|(k, v)| (k, v.len())).collect();

    let frequent: Vec<(&(Vec<String>, Direction), usize)> = support_table
        .iter()
        .filter(|(_, &n)| n >= min_support)
        .map(|(k, &n)| (k, n))
        .collect();
    let mut patterns: Vec<Pattern> = frequent
        .iter()
        .filter(|((ctx, dir), _)| {
            !frequent.iter().any(|((other, odir), _)| {
                odir == dir && other.len() > ctx.len() && other.ends_with(ctx)
            })
        })
        .map(|((ctx, dir), n)| Pattern {
            attr1: a1.to_string(),
            attr2: a2.to_string(),
            context: ctx.clone(),
            direction: *dir,
            support: *n,
        })
        .collect();
    patterns.sort_by(|a, b| {
        b.support
            .cmp(&a.support)
            .then_with(|| a.context.cmp(&b.context))
            .then(a.direction.cmp(&b.direction))
    });
    Ok(MineOutcome {
        patterns,
        documents_examined: examined,
        min_support,
        support_table,
    })
}

/// Re-derives a pattern's support: distinct retrieved documents in which the
/// pattern's context ends the run between the two values.
pub fn recount_support(
    provider: &dyn SearchProvider,
    table: &Table,
    pattern: &Pattern,
    opts: &MineOptions,
) -> Result<usize> {
    let tuples = clean_tuples(table, &pattern.attr1, &pattern.attr2, opts.sample)?;
    let results = retrieve(provider, &tuples, opts)?;
    let mut ids = BTreeSet::new();
    for ((v1, v2), docs) in tuples.iter().zip(&results) {
        let t1 = token_strings(v1);
        let t2 = token_strings(v2);
        for doc in docs {
            let tokens = token_strings(&doc.text);
            let hit = cooccurrences(&tokens, &t1, &t2, opts.max_gap)
                .iter()
                .any(|(between, dir)| *dir == pattern.direction && between.ends_with(&pattern.context));
            if hit {
                ids.insert(doc.id.clone());
            }
        }
    }
    Ok(ids.len())
}

/// Fills `sink` in `row` by locating the known value and the pattern context
/// in retrieved text and reading the dictionary entry on the sink side.
///
/// The context sits directly against the trailing value. Between the leading
/// value and the context up to `max_gap - |context|` other tokens may occur.
#[allow(clippy::too_many_arguments)]
pub fn extract_by_pattern(
    pattern: &Pattern,
    table: &Table,
    row: usize,
    sink: &str,
    provider: &dyn SearchProvider,
    dictionary: &Dictionary,
    pages: usize,
    max_gap: usize,
    retries: usize,
) -> Result<Option<Extraction>> {
    let known_attr = if sink == pattern.attr1 {
        &pattern.attr2
    } else if sink == pattern.attr2 {
        &pattern.attr1
    } else {
        return Err(Error::Config(format!("pattern {pattern} does not involve {sink}")));
    };
    let Some(known) = table.value(row, known_attr) else {
        return Ok(None);
    };
    let known_tokens = token_strings(known);
    if known_tokens.is_empty() || pattern.context.is_empty() || dictionary.is_empty() {
        return Ok(None);
    }
    let query = Query::new(vec![known.to_string(), pattern.context_text()], pages)?;
    let docs = query_with_retries(provider, &query, retries)?;
    let sink_leads = pattern.leading() == sink;
    let slack = max_gap.saturating_sub(pattern.context.len());
    for doc in &docs {
        let tokens = token_strings(&doc.text);
        let contexts = spans_of(&tokens, &pattern.context);
        for k in spans_of(&tokens, &known_tokens) {
            let found = if sink_leads {
                // [sink] .. context [known]
                contexts.iter().filter(|c| c.end == k.start).find_map(|c| {
                    (c.start.saturating_sub(slack)..=c.start)
                        .rev()
                        .find_map(|end| dictionary.match_ending_at(&tokens, end))
                })
            } else {
                // [known] .. context [sink]
                contexts
                    .iter()
                    .filter(|c| c.start >= k.end && c.start - k.end <= slack)
                    .find_map(|c| dictionary.match_at(&tokens, c.end))
            };
            if let Some((span, value)) = found {
                return Ok(Some(Extraction {
                    value: value.to_string(),
                    doc_id: doc.id.clone(),
                    rank: doc.rank,
                    position: span.start,
                    distance: None,
                }));
            }
        }
    }
    Ok(None)
}

pub fn write_patterns(patterns: &[Pattern], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut json = serde_json::to_string_pretty(patterns)?;
    json.push('\n');
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn read_patterns(path: impl AsRef<Path>) -> Result<Vec<Pattern>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let patterns: Vec<Pattern> = serde_json::from_str(&text)?;
    if let Some(p) = patterns.iter().find(|p| p.context.is_empty()) {
        return Err(Error::Config(format!(
            "{}: pattern for ({}, {}) has an empty context",
            path.display(),
            p.attr1,
            p.attr2
        )));
    }
    Ok(patterns)
}
