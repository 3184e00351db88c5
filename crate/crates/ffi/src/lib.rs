//! C interface to sdgimpute.
//!
//! Tables, rule sets and providers are opaque handles released with the
//! matching `_free` call. Every fallible call returns an
//! [`SdgStatus`]; on failure [`sdg_last_error`] describes the problem. Strings
//! handed out by the library are released with [`sdg_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sdgimpute::pipeline::{impute, RunConfig};
use sdgimpute::rules::{parse_rules, RuleSet};
use sdgimpute::sdg::{build_sdg, export_dot};
use sdgimpute::search_provider::{HttpConfig, HttpProvider, LocalCorpus, SearchProvider};
use sdgimpute::tabular::{load_table, Table};
use sdgimpute::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdgStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    /// Bad configuration or arguments.
    Config = 3,
    /// Input data could not be read or processed.
    Data = 4,
    Provider = 5,
    /// A bug inside the library; the message has details.
    Panic = 6,
}

pub struct SdgTable {
    inner: Table,
}

pub struct SdgRules {
    inner: RuleSet,
}

pub struct SdgProvider {
    inner: Box<dyn SearchProvider>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(SdgStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Config(_) => SdgStatus::Config,
            Error::Provider { .. } => SdgStatus::Provider,
            _ => SdgStatus::Data,
        };
        Failure(status, e.to_string())
    }
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SdgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SdgStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("panic: {msg}"));
            SdgStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(SdgStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(SdgStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure(SdgStatus::NullArgument, format!("{what} is null")))
}

unsafe fn put<T>(out: *mut *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure(SdgStatus::NullArgument, format!("{what} is null")));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure(SdgStatus::NullArgument, format!("{what} is null")));
    }
    let c = CString::new(s)
        .map_err(|_| Failure(SdgStatus::Data, format!("{what} contains a NUL byte")))?;
    *out = c.into_raw();
    Ok(())
}

/// Message for the last failed call on this thread, or NULL after a success.
/// Valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn sdg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sdg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sdg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sdg_table_load(path: *const c_char, out: *mut *mut SdgTable) -> SdgStatus {
    guard(|| {
        let inner = load_table(text(path, "path")?)?;
        put(out, SdgTable { inner }, "out")
    })
}

/// Parses CSV text with a header row; empty fields are missing values.
///
/// # Safety
/// `csv` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sdg_table_from_csv(csv: *const c_char, out: *mut *mut SdgTable) -> SdgStatus {
    guard(|| {
        let inner = Table::from_reader("table", text(csv, "csv")?.as_bytes())?;
        put(out, SdgTable { inner }, "out")
    })
}

/// # Safety
/// `table` must be a live handle; `out` must be writable. Free the result with `sdg_string_free`.
#[no_mangle]
pub unsafe extern "C" fn sdg_table_to_csv(table: *const SdgTable, out: *mut *mut c_char) -> SdgStatus {
    guard(|| {
        let t = handle(table, "table")?;
        put_string(out, t.inner.to_csv_string(), "out")
    })
}

/// Number of missing cells, or 0 for a NULL handle.
///
/// # Safety
/// `table` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sdg_table_count_missing(table: *const SdgTable) -> usize {
    table.as_ref().map_or(0, |t| t.inner.count_missing())
}

/// # Safety
/// `table` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sdg_table_free(table: *mut SdgTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Parses rule text. With a table, confidences not declared in the text are
/// measured on it; without one they default to 1.
///
/// # Safety
/// `rules` must be a NUL-terminated string, `table` NULL or a live handle, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sdg_rules_parse(
    rules: *const c_char,
    table: *const SdgTable,
    out: *mut *mut SdgRules,
) -> SdgStatus {
    guard(|| {
        let parsed = parse_rules(text(rules, "rules")?)?;
        let inner = match table.as_ref() {
            Some(t) => RuleSet::estimate(parsed, &t.inner)?,
            None => RuleSet::declared(parsed),
        };
        put(out, SdgRules { inner }, "out")
    })
}

/// # Safety
/// `rules` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sdg_rules_free(rules: *mut SdgRules) {
    if !rules.is_null() {
        drop(Box::from_raw(rules));
    }
}

/// Dependency graph in DOT form.
///
/// # Safety
/// `rules` must be a live handle; `out` writable. Free the result with `sdg_string_free`.
#[no_mangle]
pub unsafe extern "C" fn sdg_rules_to_dot(rules: *const SdgRules, out: *mut *mut c_char) -> SdgStatus {
    guard(|| {
        let r = handle(rules, "rules")?;
        put_string(out, export_dot(&build_sdg(&r.inner)), "out")
    })
}

/// Local provider over a JSON Lines corpus given as text (`{"id": .., "text": ..}` per line).
///
/// # Safety
/// `jsonl` must be a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sdg_provider_local(jsonl: *const c_char, out: *mut *mut SdgProvider) -> SdgStatus {
    guard(|| {
        let corpus = LocalCorpus::from_jsonl(text(jsonl, "jsonl")?.as_bytes())?;
        put(out, SdgProvider { inner: Box::new(corpus) }, "out")
    })
}

/// Local provider over a JSON Lines corpus file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sdg_provider_local_load(path: *const c_char, out: *mut *mut SdgProvider) -> SdgStatus {
    guard(|| {
        let corpus = LocalCorpus::load(text(path, "path")?)?;
        put(out, SdgProvider { inner: Box::new(corpus) }, "out")
    })
}

/// HTTP provider; `url_template` holds `{query}` and optionally `{page}`.
///
/// # Safety
/// `url_template` must be a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sdg_provider_http(url_template: *const c_char, out: *mut *mut SdgProvider) -> SdgStatus {
    guard(|| {
        let p = HttpProvider::new(HttpConfig {
            url_template: text(url_template, "url_template")?.to_string(),
            ..Default::default()
        })?;
        put(out, SdgProvider { inner: Box::new(p) }, "out")
    })
}

/// # Safety
/// `provider` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sdg_provider_free(provider: *mut SdgProvider) {
    if !provider.is_null() {
        drop(Box::from_raw(provider));
    }
}

/// Runs the full imputation. `config_json` may be NULL for defaults; it uses
/// the same field names as the command-line `--config` file. On success
/// `out_table` receives a new table and, when non-NULL, `out_report` the
/// JSON report.
///
/// # Safety
/// Handles must be live; strings NUL-terminated; output pointers writable.
#[no_mangle]
pub unsafe extern "C" fn sdg_impute(
    table: *const SdgTable,
    rules: *const SdgRules,
    provider: *const SdgProvider,
    config_json: *const c_char,
    out_table: *mut *mut SdgTable,
    out_report: *mut *mut c_char,
) -> SdgStatus {
    guard(|| {
        let t = handle(table, "table")?;
        let r = handle(rules, "rules")?;
        let p = handle(provider, "provider")?;
        let cfg = if config_json.is_null() {
            RunConfig::default()
        } else {
            RunConfig::from_json(text(config_json, "config_json")?)?
        };
        if out_table.is_null() {
            return Err(Failure(SdgStatus::NullArgument, "out_table is null".into()));
        }
        let (imputed, report) = impute(&t.inner, &r.inner, &cfg, p.inner.as_ref())?;
        if !out_report.is_null() {
            put_string(out_report, report.to_json(), "out_report")?;
        }
        put(out_table, SdgTable { inner: imputed }, "out_table")
    })
}
