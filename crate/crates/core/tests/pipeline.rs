mod common;

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use sdgimpute::error::{Error, Result};
use sdgimpute::extractor::{read_dictionary_file, Dictionary};
use sdgimpute::keyword_select::{enumerate_single_sink_graphs, select_optimal};
use sdgimpute::pattern_miner::{extract_by_pattern, read_patterns, Direction, Pattern, DEFAULT_MAX_GAP};
use sdgimpute::pipeline::{impute, impute_with, Outcome, Resources, RunConfig};
use sdgimpute::rules::{parse_rules, RuleSet};
use sdgimpute::sdg::build_sdg;
use sdgimpute::search_provider::{
    query_with_retries, Document, HttpConfig, HttpProvider, LocalCorpus, Query, SearchProvider,
};
use sdgimpute::tabular::Table;

use common::{data, read};

fn nba() -> (Table, RuleSet) {
    let t = Table::from_reader("nba", read("nba.csv").as_bytes()).unwrap();
    let rs = RuleSet::estimate(parse_rules(&read("nba.fd")).unwrap(), &t).unwrap();
    (t, rs)
}

fn location_dict() -> Resources {
    Resources {
        dictionaries: BTreeMap::from([(
            "Location".to_string(),
            read_dictionary_file(data("nba_location.dict")).unwrap(),
        )]),
        patterns: None,
    }
}

#[test]
fn nba_end_to_end() {
    let (t, rs) = nba();
    let corpus = LocalCorpus::load(data("nba.jsonl")).unwrap();
    let (out, report) = impute_with(&t, &rs, &RunConfig::default(), &corpus, &location_dict()).unwrap();
    assert_eq!(out.value(3, "Location"), Some("SanFrancsicoCA"));
    assert_eq!(out.value(3, "Capacity"), Some("7500"));
    assert_eq!(out.value(4, "Location"), Some("WheatonIL"));
    assert!(matches!(report.cell(4, "Location"), Some(Outcome::FilledPattern { .. })));
    assert_eq!(report.patterns.len(), 1);
    assert_eq!(report.counts.missing_before, t.count_missing());
}

#[test]
fn keyword_fallback_without_patterns() {
    let (t, rs) = nba();
    let corpus = LocalCorpus::load(data("nba.jsonl")).unwrap();
    let cfg = RunConfig {
        mine: false,
        ..Default::default()
    };
    let (out, report) = impute_with(&t, &rs, &cfg, &corpus, &location_dict()).unwrap();
    assert_eq!(out.value(4, "Location"), Some("WheatonIL"));
    match report.cell(4, "Location") {
        Some(Outcome::FilledKeyword { keywords, weight, .. }) => {
            assert_eq!(keywords, &["WheatonFieldHouse", "Location"]);
            assert_eq!(*weight, 1.0);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn empty_corpus_leaves_internal_fills_only() {
    let (t, rs) = nba();
    let (out, report) =
        impute_with(&t, &rs, &RunConfig::default(), &LocalCorpus::default(), &location_dict()).unwrap();
    let c = &report.counts;
    assert_eq!(c.filled_pattern + c.filled_keyword, 0);
    assert_eq!(c.filled_internal + c.abstained, c.missing_before);
    assert_eq!(out.value(4, "Location"), None);
}

#[test]
fn high_group_threshold_abstains() {
    let (t, rs) = nba();
    let corpus = LocalCorpus::load(data("nba.jsonl")).unwrap();
    let cfg = RunConfig {
        group_k: 1.0,
        ..Default::default()
    };
    let (_, report) = impute_with(&t, &rs, &cfg, &corpus, &location_dict()).unwrap();
    // with both direct routes weakened to 0.9 nothing reaches K = 1
    let mut weakened = rs.clone();
    weakened.set_confidence("f1", "Location", 0.9);
    weakened.set_confidence("f2", "Location", 0.9);
    let (_, r2) = impute_with(&t, &weakened, &cfg, &corpus, &location_dict()).unwrap();
    assert!(matches!(report.cell(4, "Location"), Some(Outcome::FilledPattern { .. })));
    assert_eq!(
        r2.cell(4, "Location"),
        Some(&Outcome::Abstained { reason: "below K".into() })
    );
}

struct Failing {
    calls: AtomicUsize,
}

impl SearchProvider for Failing {
    fn query(&self, _: &Query) -> Result<Vec<Document>> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Err(Error::Provider {
            message: "503".into(),
            retryable: true,
        })
    }
}

#[test]
fn provider_failures_abstain_and_retry() {
    let (t, rs) = nba();
    let p = Failing {
        calls: AtomicUsize::new(0),
    };
    let cfg = RunConfig {
        retries: 2,
        mine: false,
        max_concurrent_queries: 1,
        ..Default::default()
    };
    let (out, report) = impute_with(&t, &rs, &cfg, &p, &location_dict()).unwrap();
    assert_eq!(out.value(3, "Location"), Some("SanFrancsicoCA"));
    match report.cell(4, "Location") {
        Some(Outcome::Abstained { reason }) => assert!(reason.starts_with("provider error"), "{reason}"),
        other => panic!("{other:?}"),
    }
    let cells = report
        .cells
        .iter()
        .filter(|c| matches!(&c.outcome, Outcome::Abstained { reason } if reason.starts_with("provider")))
        .count();
    assert_eq!(p.calls.load(Ordering::SeqCst), cells * 3);
}

#[test]
fn pattern_cache_is_written_then_reused() {
    let (t, rs) = nba();
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("patterns.json");
    let dict = dir.path().join("loc.dict");
    std::fs::write(&dict, "WheatonIL\n").unwrap();
    let cfg = RunConfig {
        patterns: Some(cache.clone()),
        dictionaries: BTreeMap::from([("Location".into(), vec![dict])]),
        ..Default::default()
    };
    let corpus = LocalCorpus::load(data("nba.jsonl")).unwrap();
    let (first, r1) = impute(&t, &rs, &cfg, &corpus).unwrap();
    let cached = read_patterns(&cache).unwrap();
    assert_eq!(cached, r1.patterns);
    // second run loads the cache instead of mining
    let (second, r2) = impute(&t, &rs, &cfg, &corpus).unwrap();
    assert_eq!(first, second);
    assert_eq!(r1.to_json(), r2.to_json());
}

#[test]
fn reiterate_runs_one_more_internal_sweep() {
    // web fills B for row 1, after which C follows internally from B
    let t = Table::from_strs(
        "r",
        &["A", "B", "C"],
        &[&["k1", "b1", "c1"], &["k2", "", ""], &["k3", "b1", "c1"]],
    )
    .unwrap();
    let rs = RuleSet::declared(parse_rules("r1: A -> B\nr2: B -> C").unwrap());
    let corpus = LocalCorpus::from_pairs([("d", "k2 b1")]);
    let base = RunConfig {
        mine: false,
        ..Default::default()
    };
    let (once, _) = impute_with(&t, &rs, &base, &corpus, &Resources::default()).unwrap();
    assert_eq!(once.value(1, "B"), Some("b1"));
    let again = RunConfig {
        reiterate: true,
        ..base
    };
    let (twice, report) = impute_with(&t, &rs, &again, &corpus, &Resources::default()).unwrap();
    assert_eq!(twice.value(1, "C"), Some("c1"));
    assert!(matches!(report.cell(1, "C"), Some(Outcome::FilledInternal { .. })));
}

#[test]
fn se7en_by_pattern() {
    let t = Table::from_strs("f", &["Film", "Director"], &[&["Se7en", ""]]).unwrap();
    let corpus = LocalCorpus::from_pairs([
        ("a", "Fight Club director David Fincher"),
        ("b", "Se7en director David Fincher, 1995"),
    ]);
    let p = Pattern {
        attr1: "Film".into(),
        attr2: "Director".into(),
        context: vec!["director".into()],
        direction: Direction::Attr1First,
        support: 50,
    };
    let dict = Dictionary::new("Director", ["David Fincher", "Christopher Nolan"]);
    let x = extract_by_pattern(&p, &t, 0, "Director", &corpus, &dict, 5, DEFAULT_MAX_GAP, 0)
        .unwrap()
        .unwrap();
    assert_eq!((x.value.as_str(), x.doc_id.as_str()), ("David Fincher", "b"));
}

#[test]
fn film_pattern_mined_between_film_and_director() {
    let t = Table::from_reader("film", read("film.csv").as_bytes()).unwrap();
    let corpus = LocalCorpus::load(data("film.jsonl")).unwrap();
    let out = sdgimpute::pattern_miner::mine_patterns(
        &corpus,
        &t,
        ("Film", "Director"),
        &sdgimpute::pattern_miner::MineOptions {
            min_support: Some(4),
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(out.patterns.len(), 1);
    assert_eq!(out.patterns[0].context_text(), "director of");
    assert_eq!(out.patterns[0].leading(), "Director");
    assert_eq!(out.patterns[0].support, 7);
}

#[test]
fn chain_selection_scales_linearly() {
    fn time(n: usize) -> f64 {
        let names: Vec<String> = (0..=n).map(|i| format!("N{i}")).collect();
        let text: String = (0..n).map(|i| format!("c{i}: N{i} -> N{}\n", i + 1)).collect();
        let mut row = vec![None; n + 1];
        row[0] = Some("v".to_string());
        let t = Table::new("chain", names, vec![row]).unwrap();
        let rs = RuleSet::declared(parse_rules(&text).unwrap());
        let sdg = build_sdg(&rs);
        let sink = format!("N{n}");
        (0..3)
            .map(|_| {
                let s = Instant::now();
                let g = enumerate_single_sink_graphs(&sdg, &t, 0, &sink);
                assert_eq!(select_optimal(&sdg, &g, 0.5).unwrap().weight, 1.0);
                s.elapsed().as_secs_f64()
            })
            .fold(f64::INFINITY, f64::min)
    }
    let small = time(40);
    let large = time(320);
    // 8x the size; allow generous slack for timer noise
    assert!(large <= 40.0 * small.max(1e-5), "{large} vs {small}");
}

/// Serves one canned response per accepted connection and records request lines.
fn serve(responses: Vec<(u16, &'static str)>) -> (String, std::thread::JoinHandle<Vec<String>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let handle = std::thread::spawn(move || {
        let mut seen = Vec::new();
        for (status, body) in responses {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            seen.push(line.trim().to_string());
            loop {
                let mut h = String::new();
                reader.read_line(&mut h).unwrap();
                if h.trim().is_empty() {
                    break;
                }
            }
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: text/html\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
        seen
    });
    (format!("http://{addr}/search?q={{query}}&p={{page}}"), handle)
}

#[test]
fn http_provider_pages_and_strips_markup() {
    let (url, server) = serve(vec![
        (200, "<html><b>WheatonFieldHouse</b> in Wheaton, IL</html>"),
        (200, "<p>second page</p>"),
    ]);
    let p = HttpProvider::new(HttpConfig {
        url_template: url,
        delay_ms: 0,
        ..Default::default()
    })
    .unwrap();
    let docs = p
        .query(&Query::new(vec!["WheatonFieldHouse".into(), "Location".into()], 2).unwrap())
        .unwrap();
    assert_eq!(docs.len(), 2);
    assert!(docs[0].text.contains("WheatonFieldHouse"));
    assert!(!docs[0].text.contains('<'));
    assert_eq!(docs[1].rank, 1);
    let seen = server.join().unwrap();
    assert!(seen[0].contains("q=WheatonFieldHouse+Location&p=0"), "{}", seen[0]);
    assert!(seen[1].contains("p=1"));
}

#[test]
fn http_server_errors_are_retryable() {
    let (url, server) = serve(vec![(503, "busy"), (200, "fine")]);
    let p = HttpProvider::new(HttpConfig {
        url_template: url,
        delay_ms: 0,
        ..Default::default()
    })
    .unwrap();
    let q = Query::new(vec!["x".into()], 1).unwrap();
    let docs = query_with_retries(&p, &q, 1).unwrap();
    assert_eq!(docs[0].text, "fine");
    server.join().unwrap();

    let (url, server) = serve(vec![(404, "gone")]);
    let p = HttpProvider::new(HttpConfig {
        url_template: url,
        delay_ms: 0,
        ..Default::default()
    })
    .unwrap();
    let err = p.query(&q).unwrap_err();
    assert!(!err.is_retryable());
    server.join().unwrap();
    assert!(HttpProvider::new(HttpConfig::default()).is_err());
}
