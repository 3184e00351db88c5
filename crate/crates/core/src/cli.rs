//! Command-line driver.
//!
//! Exit status: 0 on success, 1 for usage or configuration problems, 2 when
//! the input data cannot be read or processed.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::evalharness::{evaluate, summary, sweep, to_csv, SweepSpec};
use crate::pattern_miner::{mine_patterns, write_patterns, MineOptions};
use crate::pipeline::{impute, ProviderConfig, Resources, RunConfig};
use crate::rules::{load_rules, RuleSet};
use crate::sdg::{build_sdg, export_dot};
use crate::search_provider::{HttpConfig, LocalCorpus, SearchProvider};
use crate::tabular::{load_table, mask_random, read_ground_truth, write_ground_truth, write_table, MaskSpec};

#[derive(Parser, Debug)]
#[command(name = "sdgimpute", version, about = "Fill missing values in CSV tables from dependency rules and text retrieval")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Impute missing cells of a table.
    Impute(ImputeArgs),
    /// Mine text patterns for an attribute pair.
    MinePatterns(MineArgs),
    /// Remove a random fraction of cells and keep the ground truth.
    Mask(MaskArgs),
    /// Score an imputed table against ground truth.
    Eval(EvalArgs),
    /// Run a mask, impute, evaluate grid.
    Sweep(SweepArgs),
    /// Export the dependency graph as DOT.
    Sdg(SdgArgs),
}

#[derive(Args, Debug, Default)]
struct ProviderArgs {
    /// JSON Lines corpus for the local provider.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// HTTP provider URL with {query} and {page} placeholders.
    #[arg(long = "url-template")]
    url_template: Option<String>,
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// JSON run configuration; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    pages: Option<usize>,
    /// Bayes posterior threshold.
    #[arg(long = "k")]
    k: Option<f64>,
    /// Keyword-group weight threshold.
    #[arg(long = "K")]
    group_k: Option<f64>,
    /// Minimum pattern support.
    #[arg(long = "Q")]
    q: Option<usize>,
    #[arg(long)]
    sample: Option<usize>,
    /// Supplementary dictionary, as attr=path. Repeatable.
    #[arg(long = "dict", value_name = "ATTR=PATH")]
    dicts: Vec<String>,
    /// Pattern cache: read if present, written after mining otherwise.
    #[arg(long)]
    patterns: Option<PathBuf>,
    /// One more Bayes sweep after the retrieval phase.
    #[arg(long)]
    reiterate: bool,
    /// Include wall-clock timings in reports.
    #[arg(long)]
    timings: bool,
    #[command(flatten)]
    provider: ProviderArgs,
}

#[derive(Args, Debug)]
struct ImputeArgs {
    #[arg(long)]
    table: PathBuf,
    #[arg(long)]
    rules: PathBuf,
    /// Imputed CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args, Debug)]
struct MineArgs {
    #[arg(long)]
    table: PathBuf,
    /// Attribute pair as A1,A2.
    #[arg(long)]
    pair: String,
    #[arg(long = "min-support", alias = "Q")]
    min_support: Option<usize>,
    #[arg(long, default_value_t = 10)]
    sample: usize,
    #[arg(long, default_value_t = 5)]
    pages: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    provider: ProviderArgs,
}

#[derive(Args, Debug)]
struct MaskArgs {
    #[arg(long)]
    table: PathBuf,
    /// Rules whose determinants must survive masking.
    #[arg(long)]
    rules: Option<PathBuf>,
    #[arg(long)]
    ratio: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Attributes never masked (comma separated or repeated).
    #[arg(long, value_delimiter = ',')]
    protect: Vec<String>,
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth JSON.
    #[arg(long)]
    truth: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    truth: PathBuf,
    /// Imputed table.
    #[arg(long)]
    table: PathBuf,
    /// Metrics JSON; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    table: PathBuf,
    #[arg(long)]
    rules: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = [0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6])]
    ratios: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3, 4, 5])]
    seeds: Vec<u64>,
    /// Page counts to sweep; the configured page count when omitted.
    #[arg(long = "pages-list", value_delimiter = ',')]
    pages_list: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    protect: Vec<String>,
    /// Per-run CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Plain-text averages.
    #[arg(long)]
    summary: Option<PathBuf>,
    #[arg(long)]
    parallel: bool,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args, Debug)]
struct SdgArgs {
    #[arg(long)]
    rules: PathBuf,
    /// Table used to measure undeclared confidences.
    #[arg(long)]
    table: Option<PathBuf>,
    /// DOT output; standard output when omitted.
    #[arg(long)]
    dot: Option<PathBuf>,
}

/// Parses `args` (program name first) and runs the subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_data_error() {
                2
            } else {
                1
            }
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Impute(a) => cmd_impute(a),
        Command::MinePatterns(a) => cmd_mine(a),
        Command::Mask(a) => cmd_mask(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Sdg(a) => cmd_sdg(a),
    }
}

fn output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

fn provider_config(args: &ProviderArgs) -> Result<Option<ProviderConfig>> {
    match (&args.corpus, &args.url_template) {
        (Some(_), Some(_)) => Err(Error::Config("give either --corpus or --url-template, not both".into())),
        (Some(c), None) => Ok(Some(ProviderConfig::Local {
            corpus: c.clone(),
            page_size: None,
        })),
        (None, Some(u)) => Ok(Some(ProviderConfig::Http(HttpConfig {
            url_template: u.clone(),
            ..Default::default()
        }))),
        (None, None) => Ok(None),
    }
}

fn parse_dicts(flags: &[String]) -> Result<BTreeMap<String, Vec<PathBuf>>> {
    let mut out: BTreeMap<String, Vec<PathBuf>> = BTreeMap::new();
    for f in flags {
        let (attr, path) = f
            .split_once('=')
            .filter(|(a, p)| !a.is_empty() && !p.is_empty())
            .ok_or_else(|| Error::Config(format!("--dict expects attr=path, got {f:?}")))?;
        out.entry(attr.to_string()).or_default().push(PathBuf::from(path));
    }
    Ok(out)
}

fn run_config(a: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(v) = a.pages {
        cfg.pages = v;
    }
    if let Some(v) = a.k {
        cfg.k = v;
    }
    if let Some(v) = a.group_k {
        cfg.group_k = v;
    }
    if a.q.is_some() {
        cfg.q = a.q;
    }
    if let Some(v) = a.sample {
        cfg.sample = v;
    }
    for (attr, paths) in parse_dicts(&a.dicts)? {
        cfg.dictionaries.insert(attr, paths);
    }
    if a.patterns.is_some() {
        cfg.patterns = a.patterns.clone();
    }
    cfg.reiterate |= a.reiterate;
    cfg.timings |= a.timings;
    if let Some(p) = provider_config(&a.provider)? {
        cfg.provider = Some(p);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn build_provider(cfg: Option<&ProviderConfig>) -> Result<Box<dyn SearchProvider>> {
    match cfg {
        Some(p) => p.build(),
        None => {
            eprintln!("warning: no search provider given; the retrieval phase will find nothing");
            Ok(Box::new(LocalCorpus::default()))
        }
    }
}

fn cmd_impute(a: ImputeArgs) -> Result<()> {
    let cfg = run_config(&a.run)?;
    let table = load_table(&a.table)?;
    let ruleset = RuleSet::estimate(load_rules(&a.rules)?, &table)?;
    let provider = build_provider(cfg.provider.as_ref())?;
    let (out, report) = impute(&table, &ruleset, &cfg, provider.as_ref())?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    match &a.out {
        Some(p) => write_table(&out, p)?,
        None => output(None, &out.to_csv_string())?,
    }
    if let Some(p) = &a.report {
        output(Some(p), &report.to_json())?;
    }
    let c = &report.counts;
    eprintln!(
        "{} missing: {} internal, {} pattern, {} keyword, {} abstained",
        c.missing_before, c.filled_internal, c.filled_pattern, c.filled_keyword, c.abstained
    );
    Ok(())
}

fn cmd_mine(a: MineArgs) -> Result<()> {
    let (a1, a2) = a
        .pair
        .split_once(',')
        .map(|(x, y)| (x.trim(), y.trim()))
        .filter(|(x, y)| !x.is_empty() && !y.is_empty())
        .ok_or_else(|| Error::Config(format!("--pair expects A1,A2, got {:?}", a.pair)))?;
    let pcfg = provider_config(&a.provider)?
        .ok_or_else(|| Error::Config("mine-patterns needs --corpus or --url-template".into()))?;
    let table = load_table(&a.table)?;
    let provider = pcfg.build()?;
    let opts = MineOptions {
        min_support: a.min_support,
        sample: a.sample,
        pages: a.pages,
        ..Default::default()
    };
    let outcome = mine_patterns(provider.as_ref(), &table, (a1, a2), &opts)?;
    match &a.out {
        Some(p) => write_patterns(&outcome.patterns, p)?,
        None => {
            let mut s = serde_json::to_string_pretty(&outcome.patterns)?;
            s.push('\n');
            output(None, &s)?
        }
    }
    eprintln!(
        "{} pattern(s) at support >= {} over {} document(s)",
        outcome.patterns.len(),
        outcome.min_support,
        outcome.documents_examined
    );
    Ok(())
}

fn cmd_mask(a: MaskArgs) -> Result<()> {
    let table = load_table(&a.table)?;
    let rules = match &a.rules {
        Some(p) => load_rules(p)?,
        None => Vec::new(),
    };
    let spec = MaskSpec::new(a.ratio, a.seed).protect(a.protect.iter().cloned());
    let (masked, truth) = mask_random(&table, &spec, &rules)?;
    write_table(&masked, &a.out)?;
    write_ground_truth(&truth, &a.truth)?;
    eprintln!("masked {} cell(s)", truth.len());
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let truth = read_ground_truth(&a.truth)?;
    let table = load_table(&a.table)?;
    let m = evaluate(&truth, &table)?;
    let mut s = serde_json::to_string_pretty(&m)?;
    s.push('\n');
    output(a.out.as_deref(), &s)
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let cfg = run_config(&a.run)?;
    if a.ratios.iter().any(|r| !(0.0..=1.0).contains(r)) {
        return Err(Error::Config("sweep ratios must lie in [0, 1]".into()));
    }
    if a.pages_list.contains(&0) {
        return Err(Error::Config("page counts must be at least 1".into()));
    }
    let table = load_table(&a.table)?;
    let rules = load_rules(&a.rules)?;
    let provider = build_provider(cfg.provider.as_ref())?;
    let res = Resources::from_config(&cfg)?;
    let spec = SweepSpec {
        ratios: a.ratios.clone(),
        seeds: a.seeds.clone(),
        pages: a.pages_list.clone(),
        protected: a.protect.clone(),
        parallel: a.parallel,
    };
    let rows = sweep(&table, &rules, &cfg, provider.as_ref(), &res, &spec);
    output(a.out.as_deref(), &to_csv(&rows, cfg.timings))?;
    let text = summary(&rows, cfg.timings);
    match &a.summary {
        Some(p) => output(Some(p), &text)?,
        None => eprint!("{text}"),
    }
    Ok(())
}

fn cmd_sdg(a: SdgArgs) -> Result<()> {
    let rules = load_rules(&a.rules)?;
    let ruleset = match &a.table {
        Some(t) => RuleSet::estimate(rules, &load_table(t)?)?,
        None => RuleSet::declared(rules),
    };
    output(a.dot.as_deref(), &export_dot(&build_sdg(&ruleset)))
}
