//! Naive Bayes imputation from the table's own evidence.
//!
//! For a missing cell `D` covered by a rule whose determinants are present in
//! the tuple, every value `d` observed for `D` (under the rule's condition) is
//! scored as `P(d) × Π P(a_i | d)` with plain frequency counts. Scores are
//! normalized into posteriors; the best candidate is filled when its posterior
//! reaches the threshold `k`.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use crate::rules::{Rule, RuleSet};
use crate::sdg::Sdg;
use crate::tabular::Table;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub value: String,
    pub score: f64,
    pub posterior: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BayesDecision {
    pub row: usize,
    pub attr: String,
    pub rule: String,
    pub candidates: Vec<Candidate>,
    /// `None` means the cell was left missing.
    pub chosen: Option<String>,
    pub threshold_k: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct InternalOptions {
    pub k: f64,
    pub max_rounds: usize,
}

impl Default for InternalOptions {
    fn default() -> Self {
        InternalOptions {
            k: 0.5,
            max_rounds: 10,
        }
    }
}

/// Distinct present values of `attr` over the tuples satisfying the rule's condition.
pub fn candidate_values(table: &Table, attr: &str, rule: &Rule) -> BTreeSet<String> {
    let Some(col) = table.column_index(attr) else {
        return BTreeSet::new();
    };
    (0..table.num_rows())
        .filter(|&r| rule.condition_holds(table, r))
        .filter_map(|r| table.get(r, col).map(str::to_string))
        .collect()
}

/// Joint score of `candidate` for `attr` given the determinant values in `evidence`.
pub fn bayes_score(
    candidate: &str,
    attr: &str,
    evidence: &[(String, String)],
    table: &Table,
    rule: &Rule,
) -> f64 {
    let Some(d_col) = table.column_index(attr) else {
        return 0.0;
    };
    let ev: Vec<(usize, &str)> = evidence
        .iter()
        .filter_map(|(a, v)| table.column_index(a).map(|c| (c, v.as_str())))
        .collect();
    let stats = RuleStats::build(table, rule, d_col, ev.iter().map(|(c, _)| *c).collect());
    let values: Vec<&str> = ev.iter().map(|(_, v)| *v).collect();
    stats.score(candidate, &values)
}

/// Frequency counts for one `(rule, dependent column)` pair over a table snapshot.
struct RuleStats<'t> {
    total: usize,
    d_count: BTreeMap<&'t str, usize>,
    /// Per evidence column: tuples with `D = d` and the column present.
    with_attr: Vec<HashMap<&'t str, usize>>,
    /// Per evidence column: tuples with `D = d` and the column equal to `a`.
    joint: Vec<HashMap<(&'t str, &'t str), usize>>,
}

impl<'t> RuleStats<'t> {
    fn build(table: &'t Table, rule: &Rule, d_col: usize, evidence_cols: Vec<usize>) -> Self {
        let mut s = RuleStats {
            total: 0,
            d_count: BTreeMap::new(),
            with_attr: vec![HashMap::new(); evidence_cols.len()],
            joint: vec![HashMap::new(); evidence_cols.len()],
        };
        for r in 0..table.num_rows() {
            if !rule.condition_holds(table, r) {
                continue;
            }
            let Some(d) = table.get(r, d_col) else { continue };
            s.total += 1;
            *s.d_count.entry(d).or_default() += 1;
            for (i, &c) in evidence_cols.iter().enumerate() {
                if let Some(a) = table.get(r, c) {
                    *s.with_attr[i].entry(d).or_default() += 1;
                    *s.joint[i].entry((d, a)).or_default() += 1;
                }
            }
        }
        s
    }

    fn score(&self, d: &str, evidence: &[&str]) -> f64 {
        let Some(&n_d) = self.d_count.get(d) else {
            return 0.0;
        };
        let mut p = n_d as f64 / self.total as f64;
        for (i, a) in evidence.iter().enumerate() {
            let den = self.with_attr[i].get(d).copied().unwrap_or(0);
            let num = self.joint[i].get(&(d, *a)).copied().unwrap_or(0);
            if den == 0 || num == 0 {
                return 0.0;
            }
            p *= num as f64 / den as f64;
        }
        p
    }
}

/// Whether `rule` can be applied to fill `(row, col)` in `table`.
fn applicable(rule: &Rule, table: &Table, row: usize, attr: &str) -> bool {
    rule.rhs.iter().any(|a| a == attr)
        && rule.condition_holds(table, row)
        && rule.lhs.iter().all(|a| table.value(row, a).is_some())
}

fn edge_confidence(sdg: &Sdg, ruleset: &RuleSet, rule: &str, attr: &str) -> f64 {
    sdg.attribute(attr)
        .and_then(|n| {
            sdg.incoming(n)
                .iter()
                .map(|&e| sdg.edge_at(e))
                .find(|e| e.rule == rule)
                .map(|e| e.weight)
        })
        .unwrap_or_else(|| ruleset.confidence(rule, attr))
}

/// Evaluates one rule for one cell; `None` when no candidate has a positive score.
fn decide(table: &Table, rule: &Rule, row: usize, col: usize, k: f64) -> Option<BayesDecision> {
    let attr = &table.columns()[col];
    let ev_cols: Vec<usize> = rule
        .lhs
        .iter()
        .map(|a| table.column_index(a).expect("rule attributes validated"))
        .collect();
    let ev_vals: Vec<&str> = ev_cols
        .iter()
        .map(|&c| table.get(row, c).expect("applicable rule"))
        .collect();
    let stats = RuleStats::build(table, rule, col, ev_cols);
    let scored: Vec<(&str, f64)> = stats
        .d_count
        .keys()
        .map(|d| (*d, stats.score(d, &ev_vals)))
        .collect();
    let total: f64 = scored.iter().map(|(_, s)| s).sum();
    if total <= 0.0 {
        return None;
    }
    let candidates: Vec<Candidate> = scored
        .iter()
        .map(|(d, s)| Candidate {
            value: d.to_string(),
            score: *s,
            posterior: s / total,
        })
        .collect();
    // candidates are in lexicographic order, so the first maximum wins ties
    let best = candidates
        .iter()
        .fold(None::<&Candidate>, |acc, c| match acc {
            Some(b) if b.posterior >= c.posterior => Some(b),
            _ => Some(c),
        })
        .expect("non-empty");
    let chosen = (best.posterior >= k).then(|| best.value.clone());
    Some(BayesDecision {
        row,
        attr: attr.clone(),
        rule: rule.id.clone(),
        candidates,
        chosen,
        threshold_k: k,
    })
}

/// Decision for one missing cell against a fixed snapshot.
///
/// Among applicable rules that yield positive evidence, the one with the
/// highest edge confidence decides (ties by rule id).
pub fn decide_cell(
    table: &Table,
    sdg: &Sdg,
    ruleset: &RuleSet,
    row: usize,
    col: usize,
    k: f64,
) -> Option<BayesDecision> {
    let attr = &table.columns()[col];
    let mut ranked: Vec<(&Rule, f64)> = ruleset
        .rules
        .iter()
        .filter(|r| applicable(r, table, row, attr))
        .map(|r| (r, edge_confidence(sdg, ruleset, &r.id, attr)))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.id.cmp(&b.0.id)));
    ranked
        .into_iter()
        .find_map(|(rule, _)| decide(table, rule, row, col, k))
}

/// Sweeps all missing cells until a sweep fills nothing or `max_rounds` is hit.
///
/// Every sweep scores against the table as it stood at the start of that
/// sweep; fills are applied between sweeps.
pub fn impute_internal(
    table: &Table,
    sdg: &Sdg,
    ruleset: &RuleSet,
    opts: InternalOptions,
) -> (Table, Vec<BayesDecision>) {
    let mut current = table.clone();
    let mut decisions: BTreeMap<(usize, usize), BayesDecision> = BTreeMap::new();
    for _ in 0..opts.max_rounds {
        let mut fills = Vec::new();
        for (r, c) in current.missing_cells() {
            if let Some(d) = decide_cell(&current, sdg, ruleset, r, c, opts.k) {
                if let Some(v) = &d.chosen {
                    fills.push((r, c, v.clone()));
                }
                decisions.insert((r, c), d);
            }
        }
        if fills.is_empty() {
            break;
        }
        for (r, c, v) in fills {
            current.set(r, c, Some(v));
        }
    }
    (current, decisions.into_values().collect())
}
