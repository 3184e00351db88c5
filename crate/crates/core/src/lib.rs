//! Imputation of missing values in relational tables.
//!
//! Functional and conditional functional dependencies are compiled into a
//! statistical dependency graph. Missing cells are first filled from the
//! table's own evidence with a naive Bayes scorer; the remainder are resolved
//! by submitting the best-supported keyword group to a [`search_provider`] and
//! extracting a value from the returned text, either through mined text
//! patterns or by dictionary distance to the keywords.

pub mod cli;
pub mod error;
pub mod evalharness;
pub mod extractor;
pub mod internal_impute;
pub mod keyword_select;
pub mod pattern_miner;
pub mod pipeline;
pub mod rules;
pub mod sdg;
pub mod search_provider;
pub mod tabular;
pub mod text;

pub use error::{Error, Result};
pub use pipeline::{impute, Resources, RunConfig, RunReport};
pub use rules::{parse_rules, Rule, RuleSet};
pub use sdg::Sdg;
pub use search_provider::{Document, LocalCorpus, Query, SearchProvider};
pub use tabular::{load_table, Table};
