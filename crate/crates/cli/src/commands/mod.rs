pub mod curate;
pub mod data;
pub mod evaluate;
pub mod retrieve;
pub mod translate;

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use ambimt_core::corpus::{parse_annotated_corpus, parse_eval_set};
use ambimt_core::index::{load_index, SenseIndex};
use ambimt_core::{AnnotatedSentence, Diagnostic, EvalItem, ParallelPair};
use anyhow::{Context, Result};
use serde::Serialize;

use crate::Format;

/// Exit status when a run completed but reported diagnostics or failures.
pub const EXIT_DIAGNOSTICS: u8 = 3;

pub struct Outcome {
    pub text: String,
    pub json: serde_json::Value,
    pub exit: u8,
}

impl Outcome {
    pub fn new(text: String, json: &impl Serialize) -> Outcome {
        Outcome {
            text,
            json: serde_json::to_value(json).expect("summaries serialize"),
            exit: 0,
        }
    }

    pub fn with_exit(mut self, exit: u8) -> Outcome {
        self.exit = exit;
        self
    }

    pub fn print(&self, format: Format) {
        match format {
            Format::Text => print!("{}", self.text),
            Format::Json => println!(
                "{}",
                serde_json::to_string_pretty(&self.json).expect("json values serialize")
            ),
        }
    }
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))
}

pub fn warn_diagnostics(path: &Path, diagnostics: &[Diagnostic]) {
    for d in diagnostics {
        log::warn!("{}:{}: {}", path.display(), d.line, d.message);
    }
}

pub fn render_diagnostics(path: &Path, diagnostics: &[Diagnostic]) -> Vec<String> {
    diagnostics
        .iter()
        .map(|d| format!("{}:{}: {}", path.display(), d.line, d.message))
        .collect()
}

/// Loads a corpus; malformed lines are logged and skipped.
pub fn load_corpus(path: &Path) -> Result<Vec<ParallelPair>> {
    let (pairs, diagnostics) = parse_annotated_corpus(open(path)?)
        .with_context(|| format!("reading {}", path.display()))?;
    warn_diagnostics(path, &diagnostics);
    Ok(pairs)
}

pub fn load_eval(path: &Path) -> Result<Vec<EvalItem>> {
    let (items, diagnostics) =
        parse_eval_set(open(path)?).with_context(|| format!("reading {}", path.display()))?;
    warn_diagnostics(path, &diagnostics);
    Ok(items)
}

/// Query sentences from either an evaluation set or a corpus. The file is
/// read as an evaluation set first; if nothing parses that way it is read as
/// a corpus.
pub fn load_queries(path: &Path) -> Result<Vec<AnnotatedSentence>> {
    let (items, eval_diags) =
        parse_eval_set(open(path)?).with_context(|| format!("reading {}", path.display()))?;
    if !items.is_empty() {
        warn_diagnostics(path, &eval_diags);
        return Ok(items.into_iter().map(|i| i.source).collect());
    }
    Ok(load_corpus(path)?.into_iter().map(|p| p.source).collect())
}

pub fn read_index(path: &Path) -> Result<SenseIndex> {
    load_index(path).with_context(|| format!("loading index {}", path.display()))
}

pub fn jsonl<T: Serialize>(rows: impl IntoIterator<Item = T>) -> String {
    let mut out = String::new();
    for row in rows {
        out.push_str(&serde_json::to_string(&row).expect("rows serialize"));
        out.push('\n');
    }
    out
}
