//! End-to-end imputation: internal Bayes phase, then retrieval for what is left.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extractor::{build_dictionary, extract_by_keywords, read_dictionary_file, Dictionary};
use crate::internal_impute::{impute_internal, InternalOptions};
use crate::keyword_select::{enumerate_single_sink_graphs, select_optimal};
use crate::pattern_miner::{
    mine_patterns, read_patterns, write_patterns, MineOptions, Pattern, DEFAULT_MAX_GAP,
};
use crate::rules::RuleSet;
use crate::sdg::build_sdg;
use crate::search_provider::{
    query_with_retries, HttpConfig, HttpProvider, LocalCorpus, Query, SearchProvider,
    DEFAULT_PAGE_SIZE,
};
use crate::tabular::Table;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProviderConfig {
    Local {
        corpus: PathBuf,
        #[serde(default)]
        page_size: Option<usize>,
    },
    Http(HttpConfig),
}

impl ProviderConfig {
    pub fn build(&self) -> Result<Box<dyn SearchProvider>> {
        Ok(match self {
            ProviderConfig::Local { corpus, page_size } => Box::new(
                LocalCorpus::load(corpus)?.with_page_size(page_size.unwrap_or(DEFAULT_PAGE_SIZE)),
            ),
            ProviderConfig::Http(cfg) => Box::new(HttpProvider::new(cfg.clone())?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Posterior a Bayes candidate needs before it is written.
    pub k: f64,
    /// Minimum keyword-group weight for retrieval.
    #[serde(rename = "K")]
    pub group_k: f64,
    /// Minimum pattern support; `None` picks half the documents examined.
    #[serde(rename = "Q")]
    pub q: Option<usize>,
    pub pages: usize,
    pub max_rounds: usize,
    pub max_concurrent_queries: usize,
    pub sample: usize,
    pub retries: usize,
    pub max_gap: usize,
    pub provider: Option<ProviderConfig>,
    /// Supplementary dictionary files per attribute.
    pub dictionaries: BTreeMap<String, Vec<PathBuf>>,
    /// Read when it exists, written after mining otherwise.
    pub patterns: Option<PathBuf>,
    pub mine: bool,
    pub reiterate: bool,
    pub timings: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            k: 0.5,
            group_k: 0.8,
            q: None,
            pages: 5,
            max_rounds: 10,
            max_concurrent_queries: 4,
            sample: 10,
            retries: 2,
            max_gap: DEFAULT_MAX_GAP,
            provider: None,
            dictionaries: BTreeMap::new(),
            patterns: None,
            mine: true,
            reiterate: false,
            timings: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(0.0..=1.0).contains(&self.k) {
            return bad(format!("k must lie in [0, 1], got {}", self.k));
        }
        if !(0.0..=1.0).contains(&self.group_k) {
            return bad(format!("K must lie in [0, 1], got {}", self.group_k));
        }
        if self.q == Some(0) {
            return bad("Q must be at least 1".into());
        }
        if self.pages == 0 {
            return bad("pages must be at least 1".into());
        }
        if self.max_rounds == 0 {
            return bad("max_rounds must be at least 1".into());
        }
        if self.max_concurrent_queries == 0 {
            return bad("max_concurrent_queries must be at least 1".into());
        }
        if self.max_gap == 0 {
            return bad("max_gap must be at least 1".into());
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    fn mine_options(&self) -> MineOptions {
        MineOptions {
            min_support: self.q,
            sample: self.sample,
            pages: self.pages,
            max_gap: self.max_gap,
            retries: self.retries,
            max_in_flight: self.max_concurrent_queries,
        }
    }
}

/// In-memory inputs that would otherwise be read from the paths in [`RunConfig`].
#[derive(Debug, Clone, Default)]
pub struct Resources {
    pub dictionaries: BTreeMap<String, Vec<String>>,
    /// When set, used as-is and no mining happens.
    pub patterns: Option<Vec<Pattern>>,
}

impl Resources {
    pub fn from_config(config: &RunConfig) -> Result<Self> {
        let mut res = Resources::default();
        for (attr, paths) in &config.dictionaries {
            let entries = res.dictionaries.entry(attr.clone()).or_default();
            for p in paths {
                entries.extend(read_dictionary_file(p)?);
            }
        }
        if let Some(p) = &config.patterns {
            if p.exists() {
                res.patterns = Some(read_patterns(p)?);
            }
        }
        Ok(res)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum Outcome {
    FilledInternal {
        value: String,
        rule: String,
        posterior: f64,
    },
    FilledPattern {
        value: String,
        pattern: String,
        doc_id: String,
        rank: usize,
    },
    FilledKeyword {
        value: String,
        keywords: Vec<String>,
        weight: f64,
        doc_id: String,
        rank: usize,
        distance: f64,
    },
    Abstained {
        reason: String,
    },
}

impl Outcome {
    pub fn value(&self) -> Option<&str> {
        match self {
            Outcome::FilledInternal { value, .. }
            | Outcome::FilledPattern { value, .. }
            | Outcome::FilledKeyword { value, .. } => Some(value),
            Outcome::Abstained { .. } => None,
        }
    }

    pub fn is_filled(&self) -> bool {
        self.value().is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellReport {
    pub row: usize,
    pub attr: String,
    #[serde(flatten)]
    pub outcome: Outcome,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub missing_before: usize,
    pub filled_internal: usize,
    pub filled_pattern: usize,
    pub filled_keyword: usize,
    pub abstained: usize,
    pub missing_after: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Timings {
    pub internal_s: f64,
    pub mining_s: f64,
    pub web_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub counts: Counts,
    pub cells: Vec<CellReport>,
    pub patterns: Vec<Pattern>,
    pub warnings: Vec<String>,
    /// Always measured; only serialized when the run asked for timings.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
    #[serde(skip)]
    pub measured: Timings,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn cell(&self, row: usize, attr: &str) -> Option<&Outcome> {
        self.cells
            .iter()
            .find(|c| c.row == row && c.attr == attr)
            .map(|c| &c.outcome)
    }
}

/// Reads dictionaries and the pattern cache named in `config`, then runs.
pub fn impute(
    table: &Table,
    ruleset: &RuleSet,
    config: &RunConfig,
    provider: &dyn SearchProvider,
) -> Result<(Table, RunReport)> {
    config.validate()?;
    let res = Resources::from_config(config)?;
    let cached = res.patterns.is_some();
    let (out, report) = impute_with(table, ruleset, config, provider, &res)?;
    if let (Some(path), false) = (&config.patterns, cached) {
        write_patterns(&report.patterns, path)?;
    }
    Ok((out, report))
}

/// What a phase-2 worker needs for one cell.
struct CellPlan {
    row: usize,
    col: usize,
    keywords: Vec<String>,
    anchors: Vec<String>,
    weight: f64,
    source_attrs: Vec<String>,
}

pub fn impute_with(
    table: &Table,
    ruleset: &RuleSet,
    config: &RunConfig,
    provider: &dyn SearchProvider,
    res: &Resources,
) -> Result<(Table, RunReport)> {
    config.validate()?;
    for rule in &ruleset.rules {
        for a in rule.attributes() {
            if table.column_index(a).is_none() {
                return Err(Error::UnknownAttribute {
                    rule: rule.id.clone(),
                    attr: a.to_string(),
                });
            }
        }
    }
    let started = Instant::now();
    let mut warnings = ruleset.warnings.clone();
    let initially_missing = table.missing_cells();
    let sdg = build_sdg(ruleset);

    // phase 1
    let (mut current, decisions) = impute_internal(
        table,
        &sdg,
        ruleset,
        InternalOptions {
            k: config.k,
            max_rounds: config.max_rounds,
        },
    );
    let mut outcomes: BTreeMap<(usize, usize), Outcome> = BTreeMap::new();
    record_internal(&mut outcomes, &current, &decisions);
    let internal_s = started.elapsed().as_secs_f64();

    // phase 2 plans against the post-phase-1 snapshot
    let mut plans = Vec::new();
    for (row, col) in current.missing_cells() {
        let sink = &current.columns()[col];
        let graphs = enumerate_single_sink_graphs(&sdg, &current, row, sink);
        if graphs.is_empty() {
            outcomes.insert(
                (row, col),
                abstain("no single sink graph"),
            );
            continue;
        }
        match select_optimal(&sdg, &graphs, config.group_k) {
            None => {
                outcomes.insert((row, col), abstain("below K"));
            }
            Some(group) => {
                let mut source_attrs = Vec::new();
                for (attr, _) in group.sources() {
                    if !source_attrs.contains(&attr) {
                        source_attrs.push(attr);
                    }
                }
                plans.push(CellPlan {
                    row,
                    col,
                    anchors: group.anchors().to_vec(),
                    keywords: group.keywords.clone(),
                    weight: group.weight,
                    source_attrs,
                });
            }
        }
    }

    let mining_started = Instant::now();
    let patterns = match &res.patterns {
        Some(p) => p.clone(),
        None if config.mine => {
            let pairs: BTreeSet<(String, String)> = plans
                .iter()
                .flat_map(|p| {
                    let sink = table.columns()[p.col].clone();
                    p.source_attrs.iter().map(move |s| (s.clone(), sink.clone()))
                })
                .collect();
            let mut mined = Vec::new();
            for (src, sink) in pairs {
                match mine_patterns(provider, table, (&src, &sink), &config.mine_options()) {
                    Ok(out) => mined.extend(out.patterns),
                    Err(e @ Error::NoMiningEvidence(..)) => warnings.push(e.to_string()),
                    Err(e) if matches!(e, Error::Provider { .. }) => {
                        warnings.push(format!("mining ({src}, {sink}): {e}"))
                    }
                    Err(e) => return Err(e),
                }
            }
            mined
        }
        None => Vec::new(),
    };
    let mining_s = mining_started.elapsed().as_secs_f64();

    let web_started = Instant::now();
    let mut dictionaries: BTreeMap<String, Dictionary> = BTreeMap::new();
    for plan in &plans {
        let sink = &current.columns()[plan.col];
        if !dictionaries.contains_key(sink) {
            let extra = res.dictionaries.get(sink).cloned().unwrap_or_default();
            let d = build_dictionary(&current, sink, &extra)?;
            if d.is_empty() {
                warnings.push(format!("dictionary for {sink} is empty"));
            }
            dictionaries.insert(sink.clone(), d);
        }
    }

    let snapshot = &current;
    let web = run_bounded(&plans, config.max_concurrent_queries, |plan| {
        resolve_cell(plan, snapshot, &patterns, &dictionaries, provider, config)
    });
    for (plan, outcome) in plans.iter().zip(web) {
        outcomes.insert((plan.row, plan.col), outcome);
    }
    // fills land in row-major order, after every extraction has finished
    for (&(row, col), outcome) in &outcomes {
        if current.get(row, col).is_none() {
            if let Some(v) = outcome.value() {
                current.set(row, col, Some(v.to_string()));
            }
        }
    }
    if config.reiterate {
        let (again, decisions) = impute_internal(
            &current,
            &sdg,
            ruleset,
            InternalOptions {
                k: config.k,
                max_rounds: 1,
            },
        );
        current = again;
        record_internal(&mut outcomes, &current, &decisions);
    }
    let web_s = web_started.elapsed().as_secs_f64();

    let mut counts = Counts {
        missing_before: initially_missing.len(),
        missing_after: current.count_missing(),
        ..Default::default()
    };
    let cells: Vec<CellReport> = initially_missing
        .iter()
        .map(|&(row, col)| {
            let outcome = outcomes
                .remove(&(row, col))
                .unwrap_or_else(|| abstain("not reached"));
            match outcome {
                Outcome::FilledInternal { .. } => counts.filled_internal += 1,
                Outcome::FilledPattern { .. } => counts.filled_pattern += 1,
                Outcome::FilledKeyword { .. } => counts.filled_keyword += 1,
                Outcome::Abstained { .. } => counts.abstained += 1,
            }
            CellReport {
                row,
                attr: table.columns()[col].clone(),
                outcome,
            }
        })
        .collect();
    let measured = Timings {
        internal_s,
        mining_s,
        web_s,
        total_s: started.elapsed().as_secs_f64(),
    };
    let report = RunReport {
        counts,
        cells,
        patterns,
        warnings,
        timings: config.timings.then(|| measured.clone()),
        measured,
    };
    Ok((current, report))
}

fn abstain(reason: &str) -> Outcome {
    Outcome::Abstained {
        reason: reason.to_string(),
    }
}

fn record_internal(
    outcomes: &mut BTreeMap<(usize, usize), Outcome>,
    current: &Table,
    decisions: &[crate::internal_impute::BayesDecision],
) {
    for d in decisions {
        let Some(value) = &d.chosen else { continue };
        let Some(col) = current.column_index(&d.attr) else { continue };
        if outcomes.get(&(d.row, col)).is_some_and(Outcome::is_filled) {
            continue;
        }
        let posterior = d
            .candidates
            .iter()
            .find(|c| &c.value == value)
            .map_or(0.0, |c| c.posterior);
        outcomes.insert(
            (d.row, col),
            Outcome::FilledInternal {
                value: value.clone(),
                rule: d.rule.clone(),
                posterior,
            },
        );
    }
}

fn resolve_cell(
    plan: &CellPlan,
    table: &Table,
    patterns: &[Pattern],
    dictionaries: &BTreeMap<String, Dictionary>,
    provider: &dyn SearchProvider,
    config: &RunConfig,
) -> Outcome {
    let sink = &table.columns()[plan.col];
    let Some(dict) = dictionaries.get(sink).filter(|d| !d.is_empty()) else {
        return abstain("empty dictionary");
    };
    let provider_error = |e: Error| abstain(&format!("provider error: {e}"));
    for src in &plan.source_attrs {
        for p in patterns.iter().filter(|p| p.involves(src, sink)) {
            match crate::pattern_miner::extract_by_pattern(
                p,
                table,
                plan.row,
                sink,
                provider,
                dict,
                config.pages,
                config.max_gap,
                config.retries,
            ) {
                Ok(Some(x)) => {
                    return Outcome::FilledPattern {
                        value: x.value,
                        pattern: p.to_string(),
                        doc_id: x.doc_id,
                        rank: x.rank,
                    }
                }
                Ok(None) => {}
                Err(e) => return provider_error(e),
            }
        }
    }
    let query = match Query::new(plan.keywords.clone(), config.pages) {
        Ok(q) => q,
        Err(e) => return abstain(&e.to_string()),
    };
    let docs = match query_with_retries(provider, &query, config.retries) {
        Ok(d) => d,
        Err(e) => return provider_error(e),
    };
    match extract_by_keywords(&docs, &plan.anchors, dict) {
        Some(x) => Outcome::FilledKeyword {
            value: x.value,
            keywords: plan.keywords.clone(),
            weight: plan.weight,
            doc_id: x.doc_id,
            rank: x.rank,
            distance: x.distance.unwrap_or(f64::INFINITY),
        },
        None => abstain("no dictionary match"),
    }
}

/// Maps `f` over `items` on at most `workers` threads, keeping input order.
fn run_bounded<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = workers.max(1).min(items.len());
    if workers <= 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                *slots[i].lock().unwrap_or_else(|p| p.into_inner()) = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().unwrap_or_else(|p| p.into_inner()).expect("slot filled"))
        .collect()
}
