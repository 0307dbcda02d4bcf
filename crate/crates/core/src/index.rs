//! Sense inventory over a disambiguated corpus.
//!
//! Polysemy degree of a lemma is the number of distinct senses it is observed
//! with in the reference corpus; sense frequency is the number of annotated
//! occurrences of a sense. Postings map each sense to the sentences and token
//! positions that carry it.
//!
//! # File format
//!
//! ```text
//! AMBIMT-SENSE-INDEX 1\n
//! <body: one line of canonical JSON, UTF-8>\n
//! sha256 <lowercase hex digest of the body bytes, newline excluded>\n
//! ```
//!
//! The body is an object with the keys `corpus_id`, `total_sense_tokens`,
//! `lemma_senses` (lemma → sorted sense list), `sense_freq` (sense → count),
//! `postings` (sense → list of `[sentence_id, token_position]`) and
//! `degree_overrides` (lemma → degree). All maps are emitted in key order so the
//! same index always serializes to the same bytes.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{ParallelPair, SenseId};
use crate::io::{sha256_hex, write_atomic};

pub const INDEX_MAGIC: &str = "AMBIMT-SENSE-INDEX";
pub const INDEX_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("index file is empty")]
    Empty,
    #[error("not a sense index file (bad header)")]
    BadHeader,
    #[error("unsupported index format version {found} (this build reads version {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },
    #[error("index file is truncated")]
    Truncated,
    #[error("index file is corrupt: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Posting {
    pub sentence_id: String,
    pub position: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SenseIndex {
    corpus_id: String,
    lemma_senses: BTreeMap<String, BTreeSet<SenseId>>,
    sense_freq: BTreeMap<SenseId, usize>,
    postings: BTreeMap<SenseId, Vec<Posting>>,
    total_sense_tokens: usize,
    degree_overrides: BTreeMap<String, usize>,
}

#[derive(Default)]
struct Partial {
    lemma_senses: BTreeMap<String, BTreeSet<SenseId>>,
    postings: BTreeMap<SenseId, Vec<Posting>>,
}

impl Partial {
    fn add(mut self, pair: &ParallelPair) -> Self {
        for (position, token) in pair.source.sense_tokens() {
            let sense = token
                .sense
                .clone()
                .expect("sense_tokens yields annotated tokens");
            self.lemma_senses
                .entry(token.lemma.clone())
                .or_default()
                .insert(sense.clone());
            self.postings.entry(sense).or_default().push(Posting {
                sentence_id: pair.source.id.clone(),
                position,
            });
        }
        self
    }

    fn merge(mut self, other: Partial) -> Self {
        for (lemma, senses) in other.lemma_senses {
            self.lemma_senses.entry(lemma).or_default().extend(senses);
        }
        for (sense, list) in other.postings {
            self.postings.entry(sense).or_default().extend(list);
        }
        self
    }
}

/// Builds the index as a parallel fold over sentences. The result does not
/// depend on input order.
pub fn build_index(corpus_id: &str, pairs: &[ParallelPair]) -> SenseIndex {
    let partial = pairs
        .par_iter()
        .fold(Partial::default, |acc, pair| acc.add(pair))
        .reduce(Partial::default, Partial::merge);

    let mut postings = partial.postings;
    for list in postings.values_mut() {
        list.sort();
    }
    let sense_freq: BTreeMap<SenseId, usize> =
        postings.iter().map(|(s, l)| (s.clone(), l.len())).collect();
    let total_sense_tokens = sense_freq.values().sum();
    SenseIndex {
        corpus_id: corpus_id.to_string(),
        lemma_senses: partial.lemma_senses,
        sense_freq,
        postings,
        total_sense_tokens,
        degree_overrides: BTreeMap::new(),
    }
}

impl SenseIndex {
    pub fn corpus_id(&self) -> &str {
        &self.corpus_id
    }

    pub fn total_sense_tokens(&self) -> usize {
        self.total_sense_tokens
    }

    /// Number of distinct senses of `lemma`, or the override if one is loaded.
    /// Unseen lemmas have degree 0.
    pub fn polysemy_degree(&self, lemma: &str) -> usize {
        let lemma = lemma.to_lowercase();
        if let Some(&d) = self.degree_overrides.get(&lemma) {
            return d;
        }
        self.lemma_senses.get(&lemma).map_or(0, BTreeSet::len)
    }

    /// Degree counted over the corpus only, ignoring overrides.
    pub fn observed_degree(&self, lemma: &str) -> usize {
        self.lemma_senses
            .get(&lemma.to_lowercase())
            .map_or(0, BTreeSet::len)
    }

    pub fn sense_frequency(&self, sense: &SenseId) -> usize {
        self.sense_freq.get(sense).copied().unwrap_or(0)
    }

    /// Occurrences of `sense`, sorted by (sentence id, token position).
    pub fn postings(&self, sense: &SenseId) -> &[Posting] {
        self.postings.get(sense).map_or(&[], Vec::as_slice)
    }

    pub fn senses_of(&self, lemma: &str) -> Option<&BTreeSet<SenseId>> {
        self.lemma_senses.get(&lemma.to_lowercase())
    }

    pub fn lemmas(&self) -> impl Iterator<Item = &str> {
        self.lemma_senses.keys().map(String::as_str)
    }

    pub fn senses(&self) -> impl Iterator<Item = (&SenseId, usize)> {
        self.sense_freq.iter().map(|(s, &f)| (s, f))
    }

    pub fn degree_overrides(&self) -> &BTreeMap<String, usize> {
        &self.degree_overrides
    }

    /// Installs knowledge-base degrees that take precedence over observed ones.
    pub fn with_degree_overrides(mut self, overrides: BTreeMap<String, usize>) -> Self {
        self.degree_overrides = overrides
            .into_iter()
            .map(|(l, d)| (l.to_lowercase(), d))
            .collect();
        self
    }

    /// Consistency checks applied when an index is loaded.
    pub fn check_invariants(&self) -> Result<(), String> {
        for (lemma, senses) in &self.lemma_senses {
            if senses.is_empty() {
                return Err(format!("lemma {lemma:?} has no senses"));
            }
        }
        let mut sum = 0;
        for (sense, &freq) in &self.sense_freq {
            let listed = self.postings.get(sense).map_or(0, Vec::len);
            if listed != freq {
                return Err(format!(
                    "sense {sense}: frequency {freq} but {listed} postings"
                ));
            }
            sum += freq;
        }
        if self
            .postings
            .keys()
            .any(|s| !self.sense_freq.contains_key(s))
        {
            return Err("postings for a sense without a frequency".into());
        }
        if sum != self.total_sense_tokens {
            return Err(format!(
                "frequencies sum to {sum} but total_sense_tokens is {}",
                self.total_sense_tokens
            ));
        }
        Ok(())
    }

    /// Canonical byte encoding (see module docs).
    pub fn to_bytes(&self) -> Vec<u8> {
        let body = IndexBody {
            corpus_id: self.corpus_id.clone(),
            total_sense_tokens: self.total_sense_tokens,
            lemma_senses: self.lemma_senses.clone(),
            sense_freq: self.sense_freq.clone(),
            postings: self
                .postings
                .iter()
                .map(|(s, l)| {
                    (
                        s.clone(),
                        l.iter()
                            .map(|p| (p.sentence_id.clone(), p.position))
                            .collect(),
                    )
                })
                .collect(),
            degree_overrides: self.degree_overrides.clone(),
        };
        let body = serde_json::to_string(&body).expect("index body always serializes");
        format!(
            "{INDEX_MAGIC} {INDEX_VERSION}\n{body}\nsha256 {}\n",
            sha256_hex(body.as_bytes())
        )
        .into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<SenseIndex, IndexError> {
        if bytes.is_empty() {
            return Err(IndexError::Empty);
        }
        let text =
            std::str::from_utf8(bytes).map_err(|_| IndexError::Corrupt("not UTF-8".into()))?;
        let mut lines = text.split_inclusive('\n');

        let header = lines.next().ok_or(IndexError::Empty)?;
        let header = header.strip_suffix('\n').ok_or(IndexError::Truncated)?;
        let version = header
            .strip_prefix(INDEX_MAGIC)
            .and_then(|rest| rest.strip_prefix(' '))
            .ok_or(IndexError::BadHeader)?;
        let version: u32 = version.parse().map_err(|_| IndexError::BadHeader)?;
        if version != INDEX_VERSION {
            return Err(IndexError::UnsupportedVersion {
                found: version,
                supported: INDEX_VERSION,
            });
        }

        let body = lines.next().ok_or(IndexError::Truncated)?;
        let body = body.strip_suffix('\n').ok_or(IndexError::Truncated)?;
        let trailer = lines.next().ok_or(IndexError::Truncated)?;
        let trailer = trailer.strip_suffix('\n').ok_or(IndexError::Truncated)?;
        let digest = trailer
            .strip_prefix("sha256 ")
            .ok_or_else(|| IndexError::Corrupt("missing checksum trailer".into()))?;
        if lines.next().is_some() {
            return Err(IndexError::Corrupt("trailing data after checksum".into()));
        }
        if sha256_hex(body.as_bytes()) != digest {
            return Err(IndexError::Corrupt("checksum mismatch".into()));
        }

        let body: IndexBody =
            serde_json::from_str(body).map_err(|e| IndexError::Corrupt(e.to_string()))?;
        let index = SenseIndex {
            corpus_id: body.corpus_id,
            lemma_senses: body.lemma_senses,
            sense_freq: body.sense_freq,
            postings: body
                .postings
                .into_iter()
                .map(|(s, l)| {
                    let list = l
                        .into_iter()
                        .map(|(sentence_id, position)| Posting {
                            sentence_id,
                            position,
                        })
                        .collect();
                    (s, list)
                })
                .collect(),
            total_sense_tokens: body.total_sense_tokens,
            degree_overrides: body.degree_overrides,
        };
        index.check_invariants().map_err(IndexError::Corrupt)?;
        Ok(index)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IndexBody {
    corpus_id: String,
    total_sense_tokens: usize,
    lemma_senses: BTreeMap<String, BTreeSet<SenseId>>,
    sense_freq: BTreeMap<SenseId, usize>,
    postings: BTreeMap<SenseId, Vec<(String, usize)>>,
    degree_overrides: BTreeMap<String, usize>,
}

pub fn save_index(index: &SenseIndex, path: &Path) -> Result<(), IndexError> {
    write_atomic(path, &index.to_bytes())?;
    Ok(())
}

pub fn load_index(path: &Path) -> Result<SenseIndex, IndexError> {
    SenseIndex::from_bytes(&std::fs::read(path)?)
}

/// Parses a `lemma<TAB>degree` override table. Blank lines and `#` comments
/// are ignored.
pub fn parse_degree_overrides(text: &str) -> Result<BTreeMap<String, usize>, String> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (lemma, degree) = line
            .split_once('\t')
            .ok_or_else(|| format!("line {}: expected lemma<TAB>degree", i + 1))?;
        let degree: usize = degree.trim().parse().map_err(|_| {
            format!(
                "line {}: degree {degree:?} is not a non-negative integer",
                i + 1
            )
        })?;
        out.insert(lemma.trim().to_lowercase(), degree);
    }
    Ok(out)
}
