//! Masking sweeps and scoring against ground truth.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::pipeline::{impute_with, Resources, RunConfig, Timings};
use crate::rules::{Rule, RuleSet};
use crate::search_provider::SearchProvider;
use crate::tabular::{mask_random, MaskSpec, MaskedCell, Table};

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Metrics {
    pub masked: usize,
    pub filled: usize,
    pub correct: usize,
    /// correct / filled
    pub accuracy: f64,
    /// filled / masked
    pub filling_ratio: f64,
    /// Set when a ratio had a zero denominator and was defined as 1.
    pub vacuous: bool,
    pub wall_time_s: f64,
    #[serde(skip)]
    pub phases: Timings,
}

/// Exact-match scoring of `imputed` at the masked positions.
pub fn evaluate(truth: &[MaskedCell], imputed: &Table) -> Result<Metrics> {
    let mut m = Metrics {
        masked: truth.len(),
        ..Default::default()
    };
    for cell in truth {
        let col = imputed.column_index(&cell.attr).ok_or_else(|| {
            Error::Eval(format!("ground truth names column {:?} absent from the table", cell.attr))
        })?;
        if cell.row >= imputed.num_rows() {
            return Err(Error::Eval(format!(
                "ground truth row {} beyond the table's {} rows",
                cell.row,
                imputed.num_rows()
            )));
        }
        if let Some(v) = imputed.get(cell.row, col) {
            m.filled += 1;
            if v == cell.value {
                m.correct += 1;
            }
        }
    }
    m.accuracy = ratio(m.correct, m.filled, &mut m.vacuous);
    m.filling_ratio = ratio(m.filled, m.masked, &mut m.vacuous);
    Ok(m)
}

fn ratio(num: usize, den: usize, vacuous: &mut bool) -> f64 {
    if den == 0 {
        *vacuous = true;
        1.0
    } else {
        num as f64 / den as f64
    }
}

/// Masks, imputes and scores one configuration.
pub fn run_once(
    table: &Table,
    rules: &[Rule],
    config: &RunConfig,
    provider: &dyn SearchProvider,
    res: &Resources,
    mask: &MaskSpec,
) -> Result<Metrics> {
    let (masked, truth) = mask_random(table, mask, rules)?;
    let started = Instant::now();
    let ruleset = RuleSet::estimate(rules.to_vec(), &masked)?;
    let (imputed, report) = impute_with(&masked, &ruleset, config, provider, res)?;
    let wall = started.elapsed().as_secs_f64();
    let mut m = evaluate(&truth, &imputed)?;
    m.wall_time_s = wall;
    m.phases = report.measured;
    Ok(m)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub ratio: f64,
    pub seed: u64,
    pub pages: usize,
    pub metrics: Option<Metrics>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct SweepSpec {
    pub ratios: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Each entry overrides `RunConfig::pages`; empty keeps the configured value.
    pub pages: Vec<usize>,
    pub protected: Vec<String>,
    pub parallel: bool,
}

/// Grid of mask → impute → evaluate runs, ordered ratio, then pages, then seed.
///
/// A failing run is recorded in its row and does not stop the sweep.
pub fn sweep(
    table: &Table,
    rules: &[Rule],
    config: &RunConfig,
    provider: &dyn SearchProvider,
    res: &Resources,
    spec: &SweepSpec,
) -> Vec<SweepRow> {
    let pages = if spec.pages.is_empty() {
        vec![config.pages]
    } else {
        spec.pages.clone()
    };
    let mut grid = Vec::new();
    for &ratio in &spec.ratios {
        for &p in &pages {
            for &seed in &spec.seeds {
                grid.push((ratio, p, seed));
            }
        }
    }
    let one = |&(ratio, p, seed): &(f64, usize, u64)| {
        let cfg = RunConfig {
            pages: p,
            ..config.clone()
        };
        let mask = MaskSpec::new(ratio, seed).protect(spec.protected.iter().cloned());
        let result = run_once(table, rules, &cfg, provider, res, &mask);
        SweepRow {
            ratio,
            seed,
            pages: p,
            error: result.as_ref().err().map(|e| e.to_string()),
            metrics: result.ok(),
        }
    };
    if spec.parallel {
        std::thread::scope(|s| {
            let handles: Vec<_> = grid.iter().map(|g| s.spawn(move || one(g))).collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("sweep worker panicked"))
                .collect()
        })
    } else {
        grid.iter().map(one).collect()
    }
}

/// Page sweep: one ratio and seed set, varying only the number of result pages.
#[allow(clippy::too_many_arguments)]
pub fn page_sweep(
    table: &Table,
    rules: &[Rule],
    config: &RunConfig,
    provider: &dyn SearchProvider,
    res: &Resources,
    ratio: f64,
    seeds: &[u64],
    pages: &[usize],
) -> Vec<SweepRow> {
    let spec = SweepSpec {
        ratios: vec![ratio],
        seeds: seeds.to_vec(),
        pages: pages.to_vec(),
        ..Default::default()
    };
    sweep(table, rules, config, provider, res, &spec)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Average {
    pub ratio: f64,
    pub pages: usize,
    pub runs: usize,
    pub failed: usize,
    pub accuracy: f64,
    pub filling_ratio: f64,
    pub wall_time_s: f64,
}

/// Arithmetic means of the successful runs per (ratio, pages).
pub fn averages(rows: &[SweepRow]) -> Vec<Average> {
    let mut groups: BTreeMap<(u64, usize), Vec<&SweepRow>> = BTreeMap::new();
    let mut order = Vec::new();
    for r in rows {
        let key = (r.ratio.to_bits(), r.pages);
        if !groups.contains_key(&key) {
            order.push(key);
        }
        groups.entry(key).or_default().push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let rows = &groups[&key];
            let ok: Vec<&Metrics> = rows.iter().filter_map(|r| r.metrics.as_ref()).collect();
            let mean = |f: fn(&Metrics) -> f64| {
                if ok.is_empty() {
                    f64::NAN
                } else {
                    ok.iter().map(|m| f(m)).sum::<f64>() / ok.len() as f64
                }
            };
            Average {
                ratio: f64::from_bits(key.0),
                pages: key.1,
                runs: ok.len(),
                failed: rows.len() - ok.len(),
                accuracy: mean(|m| m.accuracy),
                filling_ratio: mean(|m| m.filling_ratio),
                wall_time_s: mean(|m| m.wall_time_s),
            }
        })
        .collect()
}

/// Per-run CSV. Wall time is a column only when `timings` is set, so that
/// the default output is reproducible byte for byte.
pub fn to_csv(rows: &[SweepRow], timings: bool) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "ratio", "seed", "pages", "masked", "filled", "correct", "accuracy", "filling_ratio",
    ];
    if timings {
        header.push("wall_time_s");
    }
    header.push("error");
    w.write_record(&header).expect("in-memory write");
    for r in rows {
        let mut rec = vec![fmt(r.ratio), r.seed.to_string(), r.pages.to_string()];
        match &r.metrics {
            Some(m) => {
                rec.extend([
                    m.masked.to_string(),
                    m.filled.to_string(),
                    m.correct.to_string(),
                    fmt(m.accuracy),
                    fmt(m.filling_ratio),
                ]);
                if timings {
                    rec.push(fmt(m.wall_time_s));
                }
            }
            None => rec.extend(std::iter::repeat_n(String::new(), if timings { 6 } else { 5 })),
        }
        rec.push(r.error.clone().unwrap_or_default());
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("csv is utf-8")
}

pub fn summary(rows: &[SweepRow], timings: bool) -> String {
    let mut out = String::new();
    for a in averages(rows) {
        out.push_str(&format!(
            "ratio {:>5.1}%  pages {}  runs {}  accuracy {:.4}  filling ratio {:.4}",
            a.ratio * 100.0,
            a.pages,
            a.runs,
            a.accuracy,
            a.filling_ratio
        ));
        if timings {
            out.push_str(&format!("  time {:.3}s", a.wall_time_s));
        }
        if a.failed > 0 {
            out.push_str(&format!("  failed {}", a.failed));
        }
        out.push('\n');
    }
    out
}

fn fmt(x: f64) -> String {
    format!("{x:.6}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn truth(cells: &[(usize, &str, &str)]) -> Vec<MaskedCell> {
        cells
            .iter()
            .map(|&(row, attr, value)| MaskedCell {
                row,
                attr: attr.into(),
                value: value.into(),
            })
            .collect()
    }

    #[test]
    fn three_of_four() {
        let t = Table::from_strs("t", &["A"], &[&["a"], &["b"], &["c"], &["x"]]).unwrap();
        let g = truth(&[(0, "A", "a"), (1, "A", "b"), (2, "A", "c"), (3, "A", "d")]);
        let m = evaluate(&g, &t).unwrap();
        assert_eq!((m.accuracy, m.filling_ratio, m.vacuous), (0.75, 1.0, false));
    }

    #[test]
    fn unfilled_counts_against_filling_only() {
        let t = Table::from_strs("t", &["A"], &[&["a"], &[""]]).unwrap();
        let g = truth(&[(0, "A", "a"), (1, "A", "b")]);
        let m = evaluate(&g, &t).unwrap();
        assert_eq!((m.accuracy, m.filling_ratio), (1.0, 0.5));
    }

    #[test]
    fn nothing_masked_is_vacuous() {
        let t = Table::from_strs("t", &["A"], &[&["a"]]).unwrap();
        let m = evaluate(&[], &t).unwrap();
        assert_eq!((m.accuracy, m.filling_ratio, m.vacuous), (1.0, 1.0, true));
    }

    #[test]
    fn schema_mismatch() {
        let t = Table::from_strs("t", &["A"], &[&["a"]]).unwrap();
        assert!(evaluate(&truth(&[(0, "B", "a")]), &t).is_err());
        assert!(evaluate(&truth(&[(5, "A", "a")]), &t).is_err());
    }

    #[test]
    fn averages_are_means() {
        let row = |seed, acc| SweepRow {
            ratio: 0.1,
            seed,
            pages: 5,
            metrics: Some(Metrics {
                accuracy: acc,
                filling_ratio: 1.0,
                ..Default::default()
            }),
            error: None,
        };
        let rows = [row(1, 0.5), row(2, 1.0), SweepRow {
            ratio: 0.1,
            seed: 3,
            pages: 5,
            metrics: None,
            error: Some("boom".into()),
        }];
        let a = averages(&rows);
        assert_eq!(a.len(), 1);
        assert_eq!((a[0].runs, a[0].failed, a[0].accuracy), (2, 1, 0.75));
        let csv = to_csv(&rows, false);
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.lines().next().unwrap().ends_with("filling_ratio,error"));
        assert!(summary(&rows, false).contains("failed 1"));
    }
}
