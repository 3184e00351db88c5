//! Dictionary-driven value extraction from retrieved text.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::search_provider::Document;
use crate::tabular::Table;
use crate::text::{find_all, normalize, token_strings, Span};

/// Longest entry span considered, in text tokens.
const MAX_ENTRY_TOKENS: usize = 12;

/// Candidate values for one attribute.
///
/// Entries match text by their normalized form: the concatenation of their
/// case-folded tokens. `WheatonIL` therefore matches the text `Wheaton, IL`.
#[derive(Debug, Clone, Default)]
pub struct Dictionary {
    pub attr: String,
    entries: BTreeSet<String>,
    by_norm: HashMap<String, String>,
    max_chars: usize,
}

impl Dictionary {
    pub fn new<I, S>(attr: &str, entries: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut d = Dictionary {
            attr: attr.to_string(),
            ..Default::default()
        };
        for e in entries {
            d.insert(e.into());
        }
        d
    }

    pub fn insert(&mut self, entry: String) {
        let norm = normalize(&entry);
        if norm.is_empty() {
            return;
        }
        self.max_chars = self.max_chars.max(norm.len());
        // equal normalized forms resolve to the lexicographically smallest entry
        match self.by_norm.get(&norm) {
            Some(existing) if existing <= &entry => {}
            _ => {
                self.by_norm.insert(norm, entry.clone());
            }
        }
        self.entries.insert(entry);
    }

    pub fn entries(&self) -> &BTreeSet<String> {
        &self.entries
    }

    pub fn contains(&self, value: &str) -> bool {
        self.entries.contains(value)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Longest entry whose match begins at token `start`.
    pub fn match_at(&self, tokens: &[String], start: usize) -> Option<(Span, &str)> {
        let mut concat = String::new();
        let mut best = None;
        for end in start + 1..=tokens.len().min(start + MAX_ENTRY_TOKENS) {
            concat.push_str(&tokens[end - 1]);
            if concat.len() > self.max_chars {
                break;
            }
            if let Some(e) = self.by_norm.get(&concat) {
                best = Some((Span::new(start, end), e.as_str()));
            }
        }
        best
    }

    /// Longest entry whose match ends just before token `end`.
    pub fn match_ending_at(&self, tokens: &[String], end: usize) -> Option<(Span, &str)> {
        let mut best = None;
        let lo = end.saturating_sub(MAX_ENTRY_TOKENS);
        let mut concat = String::new();
        for start in (lo..end).rev() {
            concat.insert_str(0, &tokens[start]);
            if concat.len() > self.max_chars {
                break;
            }
            if let Some(e) = self.by_norm.get(&concat) {
                best = Some((Span::new(start, end), e.as_str()));
            }
        }
        best
    }

    /// Every match, scanning left to right and taking the longest entry at each start.
    pub fn occurrences(&self, tokens: &[String]) -> Vec<(Span, &str)> {
        (0..tokens.len())
            .filter_map(|i| self.match_at(tokens, i))
            .collect()
    }
}

/// Present values of `attr` plus optional supplementary entries.
pub fn build_dictionary(table: &Table, attr: &str, extra: &[String]) -> Result<Dictionary> {
    let col = table.require_column(attr)?;
    let values = (0..table.num_rows()).filter_map(|r| table.get(r, col).map(str::to_string));
    let mut d = Dictionary::new(attr, values);
    for e in extra {
        d.insert(e.clone());
    }
    Ok(d)
}

/// Reads a supplementary dictionary: one entry per line, blank lines ignored.
pub fn read_dictionary_file(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

/// Mean over present keywords of the smallest token gap to `candidate`.
///
/// Returns `f64::INFINITY` when no keyword occurs.
pub fn avg_distance(candidate: Span, keyword_positions: &BTreeMap<String, Vec<Span>>) -> f64 {
    let gaps: Vec<usize> = keyword_positions
        .values()
        .filter_map(|spans| spans.iter().map(|s| candidate.gap(s)).min())
        .collect();
    if gaps.is_empty() {
        return f64::INFINITY;
    }
    gaps.iter().sum::<usize>() as f64 / gaps.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Extraction {
    pub value: String,
    pub doc_id: String,
    pub rank: usize,
    /// Token position of the match within the document.
    pub position: usize,
    /// Average keyword distance (keyword extraction only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distance: Option<f64>,
}

/// Dictionary candidate closest on average to the keyword values.
///
/// Ties go to the lower document rank, then the earlier position, then the
/// lexicographically smaller value.
pub fn extract_by_keywords(
    documents: &[Document],
    anchors: &[String],
    dictionary: &Dictionary,
) -> Option<Extraction> {
    if dictionary.is_empty() {
        return None;
    }
    let anchor_tokens: Vec<(String, Vec<String>)> = anchors
        .iter()
        .map(|a| (a.clone(), token_strings(a)))
        .filter(|(_, t)| !t.is_empty())
        .collect();
    let mut best: Option<(f64, usize, usize, String, String)> = None;
    for doc in documents {
        let tokens = token_strings(&doc.text);
        let mut positions: BTreeMap<String, Vec<Span>> = BTreeMap::new();
        for (name, toks) in &anchor_tokens {
            let spans: Vec<Span> = find_all(&tokens, toks)
                .into_iter()
                .map(|s| Span::new(s, s + toks.len()))
                .collect();
            if !spans.is_empty() {
                positions.insert(name.clone(), spans);
            }
        }
        if positions.is_empty() {
            continue;
        }
        for (span, value) in dictionary.occurrences(&tokens) {
            if positions.values().flatten().any(|a| a.overlaps(&span)) {
                continue;
            }
            let dist = avg_distance(span, &positions);
            let key = (dist, doc.rank, span.start, value.to_string(), doc.id.clone());
            let replace = match &best {
                None => true,
                Some(b) => {
                    (key.0, key.1, key.2, &key.3)
                        .partial_cmp(&(b.0, b.1, b.2, &b.3))
                        == Some(std::cmp::Ordering::Less)
                }
            };
            if replace {
                best = Some(key);
            }
        }
    }
    best.map(|(dist, rank, position, value, doc_id)| Extraction {
        value,
        doc_id,
        rank,
        position,
        distance: Some(dist),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, rank: usize, text: &str) -> Document {
        Document {
            id: id.into(),
            text: text.into(),
            rank,
            score: 1.0,
        }
    }

    fn kw(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn dictionary_from_table_and_extra() {
        let t = Table::from_strs(
            "nba",
            &["Arena", "Location"],
            &[&["a", "SanFrancsicoCA"], &["b", ""], &["c", "OklahomaCityOK"], &["d", "SanFrancsicoCA"]],
        )
        .unwrap();
        let d = build_dictionary(&t, "Location", &[]).unwrap();
        assert_eq!(
            d.entries().iter().collect::<Vec<_>>(),
            ["OklahomaCityOK", "SanFrancsicoCA"]
        );
        let d = build_dictionary(&t, "Location", &kw(&["WheatonIL"])).unwrap();
        assert!(d.contains("WheatonIL"));
        let empty = Table::from_strs("e", &["A"], &[&[""]]).unwrap();
        assert!(build_dictionary(&empty, "A", &[]).unwrap().is_empty());
    }

    #[test]
    fn normalized_matching() {
        let d = Dictionary::new("Location", ["WheatonIL", "Wheaton"]);
        let toks = token_strings("about WheatonFieldHouse in Wheaton, IL, including");
        let (span, v) = d.match_at(&toks, 3).unwrap();
        assert_eq!(v, "WheatonIL");
        assert_eq!(span, Span::new(3, 5));
        let (span, v) = d.match_ending_at(&toks, 5).unwrap();
        assert_eq!((span.start, v), (3, "WheatonIL"));
        assert!(d.match_at(&toks, 1).is_none());
    }

    #[test]
    fn avg_distance_arithmetic() {
        let pos = BTreeMap::from([
            ("k1".to_string(), vec![Span::at(8)]),
            ("k2".to_string(), vec![Span::at(14)]),
        ]);
        assert_eq!(avg_distance(Span::at(10), &pos), 3.0);
        let one = BTreeMap::from([("k".to_string(), vec![Span::at(4)])]);
        assert_eq!(avg_distance(Span::at(5), &one), 1.0);
        let two = BTreeMap::from([("k".to_string(), vec![Span::at(3), Span::at(9)])]);
        assert_eq!(avg_distance(Span::at(5), &two), 2.0);
        assert!(avg_distance(Span::at(5), &BTreeMap::new()).is_infinite());
    }

    #[test]
    fn wheaton_snippet() {
        let d = Dictionary::new("Location", ["SanFrancsicoCA", "OklahomaCityOK", "WheatonIL"]);
        let docs = [doc(
            "w",
            0,
            "Get information about WheatonFieldHouse in Wheaton, IL, including location, directions, reviews and photos",
        )];
        let x = extract_by_keywords(&docs, &kw(&["WheatonFieldHouse"]), &d).unwrap();
        assert_eq!(x.value, "WheatonIL");
        assert!(extract_by_keywords(&[], &kw(&["WheatonFieldHouse"]), &d).is_none());
        assert!(extract_by_keywords(&docs, &kw(&["WheatonFieldHouse"]), &Dictionary::default()).is_none());
    }

    #[test]
    fn nearer_candidate_wins() {
        // keyword at 0; "near" at gap 2, "far" at gap 7
        let d = Dictionary::new("X", ["near", "far"]);
        let docs = [doc("d", 0, "key a near b c d e far")];
        let x = extract_by_keywords(&docs, &kw(&["key"]), &d).unwrap();
        assert_eq!(x.value, "near");
        assert_eq!(x.distance, Some(2.0));
    }

    #[test]
    fn ties_prefer_lower_rank_then_position() {
        let d = Dictionary::new("X", ["v1", "v2"]);
        let docs = [doc("a", 1, "key v2"), doc("b", 0, "key v1")];
        assert_eq!(extract_by_keywords(&docs, &kw(&["key"]), &d).unwrap().value, "v1");
        let docs = [doc("a", 0, "v2 key v1")];
        assert_eq!(extract_by_keywords(&docs, &kw(&["key"]), &d).unwrap().value, "v2");
    }

    #[test]
    fn documents_without_anchor_contribute_nothing() {
        let d = Dictionary::new("X", ["v1", "v2"]);
        let docs = [doc("a", 0, "v2 only"), doc("b", 1, "key then x x v1")];
        assert_eq!(extract_by_keywords(&docs, &kw(&["key"]), &d).unwrap().value, "v1");
    }
}
