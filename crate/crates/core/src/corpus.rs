//! Annotated corpus data model and the line-delimited record formats.
//!
//! Corpus file, one JSON object per line:
//!
//! ```text
//! {"id":"s1","text":"I sat by the bank","tokens":[{"surface":"bank","lemma":"bank","pos":"NOUN","sense":"bn:R","start":13,"end":17}],"target":"...","src_lang":"en","tgt_lang":"es"}
//! ```
//!
//! Evaluation file, one JSON object per line:
//!
//! ```text
//! {"id":"e1","text":"...","tokens":[...],"good":["..."],"bad":["..."]}
//! ```
//!
//! Token offsets count Unicode scalar values, not bytes. `pos` and `sense` are
//! optional; tokens need only be listed when they are of interest, but the
//! listed ones must be ordered and non-overlapping.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::BufRead;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read input: {0}")]
    Io(#[from] std::io::Error),
}

/// Opaque knowledge-base concept identifier (e.g. a BabelNet synset key).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SenseId(String);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid sense id {0:?}: must be non-empty without whitespace")]
pub struct InvalidSenseId(pub String);

impl SenseId {
    pub fn new(value: impl Into<String>) -> Result<Self, InvalidSenseId> {
        let value = value.into();
        if value.is_empty() || value.chars().any(char::is_whitespace) {
            return Err(InvalidSenseId(value));
        }
        Ok(SenseId(value))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for SenseId {
    type Error = InvalidSenseId;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        SenseId::new(value)
    }
}

impl From<SenseId> for String {
    fn from(id: SenseId) -> String {
        id.0
    }
}

impl fmt::Display for SenseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedToken {
    pub surface: String,
    /// Always lowercase.
    pub lemma: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub pos: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sense: Option<SenseId>,
    /// Character offset, inclusive.
    pub start: usize,
    /// Character offset, exclusive.
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedSentence {
    pub id: String,
    pub text: String,
    pub tokens: Vec<AnnotatedToken>,
}

impl AnnotatedSentence {
    /// Positions and tokens that carry a sense annotation.
    pub fn sense_tokens(&self) -> impl Iterator<Item = (usize, &AnnotatedToken)> {
        self.tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| t.sense.is_some())
    }

    pub fn has_sense(&self, sense: &SenseId) -> bool {
        self.tokens.iter().any(|t| t.sense.as_ref() == Some(sense))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParallelPair {
    pub source: AnnotatedSentence,
    pub target: String,
    pub src_lang: String,
    pub tgt_lang: String,
}

impl ParallelPair {
    pub fn id(&self) -> &str {
        &self.source.id
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalItem {
    pub id: String,
    pub source: AnnotatedSentence,
    pub good: Vec<String>,
    pub bad: Vec<String>,
}

impl EvalItem {
    /// The single sense-bearing token.
    pub fn ambiguous_token(&self) -> &AnnotatedToken {
        self.source
            .sense_tokens()
            .next()
            .map(|(_, t)| t)
            .expect("eval items carry exactly one sense-bearing token")
    }
}

/// A rejected input line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    /// 1-based line number.
    pub line: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// Parsed corpus with id lookup.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pairs: Vec<ParallelPair>,
    by_id: HashMap<String, usize>,
}

impl Corpus {
    /// Builds a corpus; later duplicates of an id are dropped.
    pub fn new(pairs: Vec<ParallelPair>) -> Self {
        let mut by_id = HashMap::with_capacity(pairs.len());
        let mut kept = Vec::with_capacity(pairs.len());
        for pair in pairs {
            if by_id.contains_key(pair.id()) {
                continue;
            }
            by_id.insert(pair.id().to_string(), kept.len());
            kept.push(pair);
        }
        Corpus { pairs: kept, by_id }
    }

    pub fn get(&self, id: &str) -> Option<&ParallelPair> {
        self.by_id.get(id).map(|&i| &self.pairs[i])
    }

    pub fn pairs(&self) -> &[ParallelPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn into_pairs(self) -> Vec<ParallelPair> {
        self.pairs
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawToken {
    surface: String,
    lemma: String,
    #[serde(default)]
    pos: Option<String>,
    #[serde(default)]
    sense: Option<String>,
    start: usize,
    end: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCorpusRecord {
    id: String,
    text: String,
    tokens: Vec<RawToken>,
    target: String,
    src_lang: String,
    tgt_lang: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvalRecord {
    id: String,
    text: String,
    tokens: Vec<RawToken>,
    good: Vec<String>,
    bad: Vec<String>,
}

#[derive(Serialize)]
struct CorpusRecordOut<'a> {
    id: &'a str,
    text: &'a str,
    tokens: &'a [AnnotatedToken],
    target: &'a str,
    src_lang: &'a str,
    tgt_lang: &'a str,
}

#[derive(Serialize)]
struct EvalRecordOut<'a> {
    id: &'a str,
    text: &'a str,
    tokens: &'a [AnnotatedToken],
    good: &'a [String],
    bad: &'a [String],
}

fn build_sentence(
    id: String,
    text: String,
    raw: Vec<RawToken>,
) -> Result<AnnotatedSentence, String> {
    if id.is_empty() {
        return Err("empty sentence id".into());
    }
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::with_capacity(raw.len());
    let mut prev_end = 0usize;
    for (i, t) in raw.into_iter().enumerate() {
        if t.start >= t.end || t.end > chars.len() {
            return Err(format!(
                "token {i}: span [{}, {}) invalid for text of length {}",
                t.start,
                t.end,
                chars.len()
            ));
        }
        if t.start < prev_end {
            return Err(format!(
                "token {i}: span overlaps or precedes the previous token"
            ));
        }
        prev_end = t.end;
        let covered: String = chars[t.start..t.end].iter().collect();
        if covered != t.surface {
            return Err(format!(
                "token {i}: surface {:?} does not match text span {:?}",
                t.surface, covered
            ));
        }
        let sense = match t.sense {
            None => None,
            Some(s) => Some(SenseId::new(s).map_err(|e| format!("token {i}: {e}"))?),
        };
        let lemma = t.lemma.to_lowercase();
        if sense.is_some() && lemma.is_empty() {
            return Err(format!("token {i}: sense given without a lemma"));
        }
        tokens.push(AnnotatedToken {
            surface: t.surface,
            lemma,
            pos: t.pos.unwrap_or_default(),
            sense,
            start: t.start,
            end: t.end,
        });
    }
    Ok(AnnotatedSentence { id, text, tokens })
}

/// Parses one corpus line (without the trailing newline).
pub fn parse_corpus_line(line: &str) -> Result<ParallelPair, String> {
    let raw: RawCorpusRecord =
        serde_json::from_str(line).map_err(|e| format!("malformed record: {e}"))?;
    if raw.target.trim().is_empty() {
        return Err("empty target".into());
    }
    if raw.src_lang.is_empty() || raw.tgt_lang.is_empty() {
        return Err("empty language code".into());
    }
    if raw.src_lang == raw.tgt_lang {
        return Err(format!(
            "source and target language are both {:?}",
            raw.src_lang
        ));
    }
    let source = build_sentence(raw.id, raw.text, raw.tokens)?;
    Ok(ParallelPair {
        source,
        target: raw.target,
        src_lang: raw.src_lang,
        tgt_lang: raw.tgt_lang,
    })
}

/// Parses one evaluation-set line (without the trailing newline).
pub fn parse_eval_line(line: &str) -> Result<EvalItem, String> {
    let raw: RawEvalRecord =
        serde_json::from_str(line).map_err(|e| format!("malformed record: {e}"))?;
    let source = build_sentence(raw.id.clone(), raw.text, raw.tokens)?;
    let senses = source.sense_tokens().count();
    if senses != 1 {
        return Err(format!(
            "expected exactly one sense-bearing token, found {senses}"
        ));
    }
    let good = dedup_variants(raw.good);
    let bad = dedup_variants(raw.bad);
    if good.is_empty() || bad.is_empty() {
        return Err("good and bad lexicalization sets must both be non-empty".into());
    }
    let folded: HashSet<String> = good.iter().map(|g| g.to_lowercase()).collect();
    if let Some(shared) = bad.iter().find(|b| folded.contains(&b.to_lowercase())) {
        return Err(format!(
            "lexicalization {shared:?} is listed as both good and bad"
        ));
    }
    Ok(EvalItem {
        id: raw.id,
        source,
        good,
        bad,
    })
}

fn dedup_variants(values: Vec<String>) -> Vec<String> {
    let mut seen = HashSet::new();
    values
        .into_iter()
        .map(|v| v.trim().to_string())
        .filter(|v| !v.is_empty() && seen.insert(v.clone()))
        .collect()
}

/// Splits a byte stream into (line number, line) pairs. Blank lines are not
/// records and are dropped; a trailing `\r` is stripped.
fn read_lines<R: BufRead>(
    mut reader: R,
) -> Result<Vec<(usize, Result<String, String>)>, CorpusError> {
    let mut out = Vec::new();
    let mut buf = Vec::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf)?;
        if n == 0 {
            break;
        }
        line_no += 1;
        if buf.last() == Some(&b'\n') {
            buf.pop();
        }
        if buf.last() == Some(&b'\r') {
            buf.pop();
        }
        if buf.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let line =
            String::from_utf8(buf.clone()).map_err(|_| "line is not valid UTF-8".to_string());
        out.push((line_no, line));
    }
    Ok(out)
}

fn parse_records<R, T, F>(
    reader: R,
    parse: F,
    id_of: fn(&T) -> &str,
) -> Result<(Vec<T>, Vec<Diagnostic>), CorpusError>
where
    R: BufRead,
    T: Send,
    F: Fn(&str) -> Result<T, String> + Sync,
{
    let lines = read_lines(reader)?;
    let parsed: Vec<(usize, Result<T, String>)> = lines
        .into_par_iter()
        .map(|(n, line)| (n, line.and_then(|l| parse(&l))))
        .collect();

    let mut seen = HashSet::new();
    let mut items = Vec::new();
    let mut diagnostics = Vec::new();
    for (line, result) in parsed {
        match result {
            Ok(item) => {
                if seen.insert(id_of(&item).to_string()) {
                    items.push(item);
                } else {
                    diagnostics.push(Diagnostic {
                        line,
                        message: format!(
                            "duplicate id {:?}; keeping the first occurrence",
                            id_of(&item)
                        ),
                    });
                }
            }
            Err(message) => diagnostics.push(Diagnostic { line, message }),
        }
    }
    Ok((items, diagnostics))
}

/// Parses an annotated parallel corpus. Malformed lines and duplicate ids
/// produce diagnostics and are skipped; only I/O failures are fatal.
pub fn parse_annotated_corpus<R: BufRead>(
    reader: R,
) -> Result<(Vec<ParallelPair>, Vec<Diagnostic>), CorpusError> {
    parse_records(reader, parse_corpus_line, |p: &ParallelPair| p.id())
}

/// Parses an evaluation set; items violating the one-ambiguous-word rule or
/// with overlapping good/bad sets are rejected with a diagnostic.
pub fn parse_eval_set<R: BufRead>(
    reader: R,
) -> Result<(Vec<EvalItem>, Vec<Diagnostic>), CorpusError> {
    parse_records(reader, parse_eval_line, |e: &EvalItem| e.id.as_str())
}

pub fn corpus_record_line(pair: &ParallelPair) -> String {
    serde_json::to_string(&CorpusRecordOut {
        id: &pair.source.id,
        text: &pair.source.text,
        tokens: &pair.source.tokens,
        target: &pair.target,
        src_lang: &pair.src_lang,
        tgt_lang: &pair.tgt_lang,
    })
    .expect("corpus records always serialize")
}

/// Serializes pairs in the corpus line format, newline-terminated.
pub fn write_corpus(pairs: &[ParallelPair]) -> String {
    let mut out = String::new();
    for pair in pairs {
        out.push_str(&corpus_record_line(pair));
        out.push('\n');
    }
    out
}

pub fn write_eval_set(items: &[EvalItem]) -> String {
    let mut out = String::new();
    for item in items {
        let line = serde_json::to_string(&EvalRecordOut {
            id: &item.id,
            text: &item.source.text,
            tokens: &item.source.tokens,
            good: &item.good,
            bad: &item.bad,
        })
        .expect("eval records always serialize");
        out.push_str(&line);
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub sentences: usize,
    pub tokens: usize,
    pub sense_tokens: usize,
    pub distinct_lemmas: usize,
    pub distinct_sense_lemmas: usize,
    pub distinct_senses: usize,
}

pub fn validate_corpus(pairs: &[ParallelPair]) -> ValidationReport {
    let mut lemmas = BTreeSet::new();
    let mut sense_lemmas = BTreeSet::new();
    let mut senses = BTreeSet::new();
    let mut report = ValidationReport {
        sentences: pairs.len(),
        ..Default::default()
    };
    for pair in pairs {
        for token in &pair.source.tokens {
            report.tokens += 1;
            if !token.lemma.is_empty() {
                lemmas.insert(token.lemma.as_str());
            }
            if let Some(sense) = &token.sense {
                report.sense_tokens += 1;
                sense_lemmas.insert(token.lemma.as_str());
                senses.insert(sense);
            }
        }
    }
    report.distinct_lemmas = lemmas.len();
    report.distinct_sense_lemmas = sense_lemmas.len();
    report.distinct_senses = senses.len();
    report
}
