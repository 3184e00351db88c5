//! Retrieval behind a uniform interface.
//!
//! [`LocalCorpus`] ranks a JSON Lines corpus deterministically and is what the
//! tests and the evaluation harness use. [`HttpProvider`] issues one GET per
//! result page against a URL template and hands back the tag-stripped body.

use std::collections::{BTreeSet, HashMap};
use std::io::BufRead;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{find_all, token_strings};

pub const DEFAULT_PAGE_SIZE: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub keywords: Vec<String>,
    pub pages: usize,
}

impl Query {
    pub fn new(keywords: Vec<String>, pages: usize) -> Result<Self> {
        if keywords.is_empty() {
            return Err(Error::Config("query needs at least one keyword".into()));
        }
        if pages == 0 {
            return Err(Error::Config("query needs at least one page".into()));
        }
        Ok(Query { keywords, pages })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub rank: usize,
    pub score: f64,
}

pub trait SearchProvider: Send + Sync {
    fn query(&self, q: &Query) -> Result<Vec<Document>>;
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct CorpusEntry {
    pub id: String,
    pub text: String,
}

/// In-memory corpus with a token-level inverted index.
#[derive(Debug, Clone, Default)]
pub struct LocalCorpus {
    entries: Vec<CorpusEntry>,
    tokens: Vec<Vec<String>>,
    postings: HashMap<String, Vec<usize>>,
    pub page_size: usize,
}

impl LocalCorpus {
    pub fn new(entries: Vec<CorpusEntry>) -> Self {
        let tokens: Vec<Vec<String>> = entries.iter().map(|e| token_strings(&e.text)).collect();
        let mut postings: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, toks) in tokens.iter().enumerate() {
            for t in toks.iter().collect::<BTreeSet<_>>() {
                postings.entry(t.clone()).or_default().push(i);
            }
        }
        LocalCorpus {
            entries,
            tokens,
            postings,
            page_size: DEFAULT_PAGE_SIZE,
        }
    }

    pub fn from_pairs<I, A, B>(docs: I) -> Self
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        LocalCorpus::new(
            docs.into_iter()
                .map(|(id, text)| CorpusEntry {
                    id: id.into(),
                    text: text.into(),
                })
                .collect(),
        )
    }

    pub fn from_jsonl<R: BufRead>(reader: R) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::Corpus {
                line: i + 1,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: CorpusEntry = serde_json::from_str(&line).map_err(|e| Error::Corpus {
                line: i + 1,
                message: e.to_string(),
            })?;
            entries.push(entry);
        }
        Ok(LocalCorpus::new(entries))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        LocalCorpus::from_jsonl(std::io::BufReader::new(file))
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("plain strings"));
            out.push('\n');
        }
        out
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn with_page_size(mut self, page_size: usize) -> Self {
        self.page_size = page_size.max(1);
        self
    }

    fn contains(&self, doc: usize, keyword: &[String]) -> bool {
        !find_all(&self.tokens[doc], keyword).is_empty()
    }
}

impl SearchProvider for LocalCorpus {
    /// Score = number of distinct keywords whose token run occurs in the document.
    fn query(&self, q: &Query) -> Result<Vec<Document>> {
        let keywords: BTreeSet<Vec<String>> = q
            .keywords
            .iter()
            .map(|k| token_strings(k))
            .filter(|t| !t.is_empty())
            .collect();
        let mut scores: HashMap<usize, usize> = HashMap::new();
        for kw in &keywords {
            let Some(posting) = self.postings.get(&kw[0]) else {
                continue;
            };
            for &doc in posting {
                if self.contains(doc, kw) {
                    *scores.entry(doc).or_default() += 1;
                }
            }
        }
        let mut ranked: Vec<(usize, usize)> = scores.into_iter().collect();
        ranked.sort_by(|a, b| {
            b.1.cmp(&a.1)
                .then_with(|| self.entries[a.0].id.cmp(&self.entries[b.0].id))
                .then(a.0.cmp(&b.0))
        });
        ranked.truncate(q.pages.saturating_mul(self.page_size));
        Ok(ranked
            .into_iter()
            .enumerate()
            .map(|(rank, (doc, score))| Document {
                id: self.entries[doc].id.clone(),
                text: self.entries[doc].text.clone(),
                rank,
                score: score as f64,
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpConfig {
    /// `{query}` is replaced by the URL-encoded keywords, `{page}` by the 0-based page.
    pub url_template: String,
    pub delay_ms: u64,
    pub user_agent: String,
    pub timeout_ms: u64,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            url_template: String::new(),
            delay_ms: 1000,
            user_agent: concat!("sdgimpute/", env!("CARGO_PKG_VERSION")).to_string(),
            timeout_ms: 10_000,
        }
    }
}

/// Generic HTTP engine: one GET per page, body returned as a single document.
pub struct HttpProvider {
    config: HttpConfig,
    agent: ureq::Agent,
}

impl HttpProvider {
    pub fn new(config: HttpConfig) -> Result<Self> {
        if !config.url_template.contains("{query}") {
            return Err(Error::Config(
                "url template must contain a {query} placeholder".into(),
            ));
        }
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .user_agent(config.user_agent.as_str())
            .build()
            .into();
        Ok(HttpProvider { config, agent })
    }

    pub fn url_for(&self, keywords: &[String], page: usize) -> String {
        let joined = keywords.join(" ");
        let encoded: String = url::form_urlencoded::byte_serialize(joined.as_bytes()).collect();
        self.config
            .url_template
            .replace("{query}", &encoded)
            .replace("{page}", &page.to_string())
    }
}

impl SearchProvider for HttpProvider {
    fn query(&self, q: &Query) -> Result<Vec<Document>> {
        let mut docs = Vec::new();
        for page in 0..q.pages {
            if page > 0 && self.config.delay_ms > 0 {
                std::thread::sleep(Duration::from_millis(self.config.delay_ms));
            }
            let url = self.url_for(&q.keywords, page);
            let body = self
                .agent
                .get(&url)
                .call()
                .and_then(|mut r| r.body_mut().read_to_string())
                .map_err(|e| {
                    let retryable = match &e {
                        ureq::Error::StatusCode(code) => *code == 429 || *code >= 500,
                        _ => true,
                    };
                    Error::Provider {
                        message: format!("GET {url}: {e}"),
                        retryable,
                    }
                })?;
            let rank = docs.len();
            docs.push(Document {
                id: format!("page-{page}"),
                text: strip_tags(&body),
                rank,
                score: 1.0 / (rank as f64 + 1.0),
            });
        }
        Ok(docs)
    }
}

/// Runs `q`, re-issuing it up to `retries` more times on retryable failures.
pub fn query_with_retries(provider: &dyn SearchProvider, q: &Query, retries: usize) -> Result<Vec<Document>> {
    let mut attempt = 0;
    loop {
        match provider.query(q) {
            Err(e) if e.is_retryable() && attempt < retries => attempt += 1,
            other => return other,
        }
    }
}

/// Issues every query with at most `max_in_flight` outstanding at once.
///
/// Results come back in input order whatever the completion order.
pub fn query_all(
    provider: &dyn SearchProvider,
    queries: &[Query],
    max_in_flight: usize,
    retries: usize,
) -> Vec<Result<Vec<Document>>> {
    let workers = max_in_flight.max(1).min(queries.len());
    if workers <= 1 {
        return queries
            .iter()
            .map(|q| query_with_retries(provider, q, retries))
            .collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<Vec<Document>>>>> =
        queries.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= queries.len() {
                    break;
                }
                let r = query_with_retries(provider, &queries[i], retries);
                *slots[i].lock().unwrap_or_else(|p| p.into_inner()) = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| {
            m.into_inner()
                .unwrap_or_else(|p| p.into_inner())
                .expect("every query slot is filled")
        })
        .collect()
}

/// Drops markup, script and style bodies; decodes the common entities.
pub fn strip_tags(html: &str) -> String {
    let mut out = String::with_capacity(html.len());
    let mut rest = html;
    while let Some(lt) = rest.find('<') {
        out.push_str(&rest[..lt]);
        rest = &rest[lt..];
        let lower = rest.get(..8).unwrap_or(rest).to_ascii_lowercase();
        let skip_to = if lower.starts_with("<script") {
            Some("</script>")
        } else if lower.starts_with("<style") {
            Some("</style>")
        } else {
            None
        };
        let end = match skip_to {
            Some(close) => rest
                .to_ascii_lowercase()
                .find(close)
                .map(|i| i + close.len()),
            None => rest.find('>').map(|i| i + 1),
        };
        match end {
            Some(e) => {
                out.push(' ');
                rest = &rest[e..];
            }
            None => {
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out.replace("&nbsp;", " ")
        .replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&quot;", "\"")
        .replace("&#39;", "'")
        .replace("&amp;", "&")
}
