//! Sense-aware tooling for translating ambiguous sentences with LLMs.
//!
//! The crate is organised as a pipeline:
//!
//! - [`corpus`]: annotated parallel corpora and evaluation sets (line-delimited JSON).
//! - [`index`]: sense inventory with polysemy degrees, sense frequencies and postings.
//! - [`retrieval`]: same-sense demonstration retrieval for k-shot prompting.
//! - [`prompt`]: prompt templates, completion parsing and Alpaca records.
//! - [`curation`]: ambiguity-ranked fine-tuning corpus selection.
//! - [`llm`]: HTTP completion client with caching, plus a deterministic mock model.
//! - [`eval`]: disambiguation accuracy and Pearson correlation against MT metrics.
//! - [`synth`]: deterministic synthetic corpora for offline experiments.

pub mod corpus;
pub mod curation;
pub mod eval;
pub mod index;
pub mod io;
pub mod llm;
pub mod prompt;
pub mod retrieval;
pub mod synth;

pub use corpus::{
    AnnotatedSentence, AnnotatedToken, Corpus, Diagnostic, EvalItem, ParallelPair, SenseId,
};
pub use index::SenseIndex;

/// Version string recorded in manifests and persisted artifacts.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
