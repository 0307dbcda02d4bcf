//! Ambiguity-driven selection of a fine-tuning corpus.
//!
//! Every sentence with at least one sense annotation gets two scores: the
//! highest polysemy degree among its annotated lemmas and the lowest frequency
//! among its senses. Sentences are ranked twice (most polysemous first, rarest
//! first) and the two rankings are interleaved, degree first, until `N`
//! sentences are taken. A sentence already taken is skipped and the next one
//! from the same ranking is used instead, so the selection keeps exactly
//! `min(N, scoreable)` distinct sentences.

use std::cmp::Reverse;
use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::corpus::{AnnotatedSentence, Corpus};
use crate::index::SenseIndex;
use crate::io::write_atomic;
use crate::prompt::render_alpaca_record;

/// Sentences held out for validation during fine-tuning.
pub const DEFAULT_HOLDOUT: usize = 500;

#[derive(Debug, Error)]
pub enum CurationError {
    #[error("holdout of {holdout} is not smaller than the {selected} selected sentences")]
    HoldoutTooLarge { holdout: usize, selected: usize },
    #[error("sentence id {0:?} is not in the corpus")]
    MissingId(String),
    #[error("the training split is empty")]
    EmptyTrain,
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AmbiguityScore {
    pub max_degree: usize,
    pub min_freq: usize,
}

pub fn score_sentence(sentence: &AnnotatedSentence, index: &SenseIndex) -> Option<AmbiguityScore> {
    sentence.sense_tokens().fold(None, |acc, (_, token)| {
        let sense = token
            .sense
            .as_ref()
            .expect("sense_tokens yields annotated tokens");
        let degree = index.polysemy_degree(&token.lemma);
        let freq = index.sense_frequency(sense);
        Some(match acc {
            None => AmbiguityScore {
                max_degree: degree,
                min_freq: freq,
            },
            Some(s) => AmbiguityScore {
                max_degree: s.max_degree.max(degree),
                min_freq: s.min_freq.min(freq),
            },
        })
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CurationRanking {
    pub by_degree: Vec<String>,
    pub by_rarity: Vec<String>,
    pub selected: Vec<String>,
    pub target_size: usize,
}

/// Ranks the scoreable sentences two ways and interleaves them into a
/// selection of size `min(n, scoreable)`. Ties are broken by the other score,
/// then by sentence id, so the result is independent of corpus order.
pub fn rank_and_interleave(corpus: &Corpus, index: &SenseIndex, n: usize) -> CurationRanking {
    let scored: Vec<(&str, AmbiguityScore)> = corpus
        .pairs()
        .par_iter()
        .filter_map(|p| score_sentence(&p.source, index).map(|s| (p.id(), s)))
        .collect();

    let mut by_degree = scored.clone();
    by_degree.sort_by_key(|&(id, s)| (Reverse(s.max_degree), s.min_freq, id));
    let mut by_rarity = scored;
    by_rarity.sort_by_key(|&(id, s)| (s.min_freq, Reverse(s.max_degree), id));

    let by_degree: Vec<String> = by_degree
        .into_iter()
        .map(|(id, _)| id.to_string())
        .collect();
    let by_rarity: Vec<String> = by_rarity
        .into_iter()
        .map(|(id, _)| id.to_string())
        .collect();

    let want = n.min(by_degree.len());
    let mut selected = Vec::with_capacity(want);
    let mut taken: HashSet<&str> = HashSet::with_capacity(want);
    let mut cursors = [0usize, 0usize];
    let lists = [&by_degree, &by_rarity];
    let mut turn = 0;
    while selected.len() < want {
        let list = lists[turn];
        let cursor = &mut cursors[turn];
        // both lists hold every scoreable id, so an untaken one always remains
        while taken.contains(list[*cursor].as_str()) {
            *cursor += 1;
        }
        taken.insert(list[*cursor].as_str());
        selected.push(list[*cursor].clone());
        *cursor += 1;
        turn = 1 - turn;
    }

    CurationRanking {
        by_degree,
        by_rarity,
        selected,
        target_size: n,
    }
}

/// Holds out `holdout` ids, chosen uniformly by a seeded generator, for
/// validation. Both splits keep the order of `selected`.
pub fn split_validation(
    selected: &[String],
    holdout: usize,
    seed: u64,
) -> Result<(Vec<String>, Vec<String>), CurationError> {
    if holdout >= selected.len() {
        return Err(CurationError::HoldoutTooLarge {
            holdout,
            selected: selected.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut held = vec![false; selected.len()];
    for i in sample(&mut rng, selected.len(), holdout) {
        held[i] = true;
    }
    let mut train = Vec::with_capacity(selected.len() - holdout);
    let mut valid = Vec::with_capacity(holdout);
    for (id, &h) in selected.iter().zip(&held) {
        if h {
            valid.push(id.clone());
        } else {
            train.push(id.clone());
        }
    }
    Ok((train, valid))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoraConfig {
    pub rank: u32,
    pub alpha: u32,
    pub dropout: f64,
    pub target_modules: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainingConfig {
    pub effective_batch_size: u32,
    pub learning_rate: f64,
    pub max_length: u32,
    pub epochs: u32,
    pub shuffle_each_epoch: bool,
    pub checkpoint_selection: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InferenceConfig {
    pub beam_size: u32,
    pub max_new_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataSummary {
    pub format: String,
    pub train_file: String,
    pub valid_file: String,
    pub train_records: usize,
    pub valid_records: usize,
    pub target_size: usize,
    pub holdout: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub corpus_id: String,
    pub index_checksum: String,
    pub seed: u64,
    pub tool_version: String,
}

/// Hyperparameters and provenance written next to the fine-tuning data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FinetuneManifest {
    pub lora: LoraConfig,
    pub training: TrainingConfig,
    pub inference: InferenceConfig,
    pub data: DataSummary,
    pub provenance: Provenance,
}

impl FinetuneManifest {
    /// LoRA on query/key/value with rank 8, alpha 8, dropout 0.05; effective
    /// batch 32, lr 3e-4, max length 256, 5 epochs; beam 3 at inference.
    pub fn new(target_size: usize, holdout: usize, provenance: Provenance) -> Self {
        FinetuneManifest {
            lora: LoraConfig {
                rank: 8,
                alpha: 8,
                dropout: 0.05,
                target_modules: vec!["query".into(), "key".into(), "value".into()],
            },
            training: TrainingConfig {
                effective_batch_size: 32,
                learning_rate: 3e-4,
                max_length: 256,
                epochs: 5,
                shuffle_each_epoch: true,
                checkpoint_selection: "lowest validation cross-entropy".into(),
            },
            inference: InferenceConfig {
                beam_size: 3,
                max_new_tokens: 150,
            },
            data: DataSummary {
                format: "alpaca-jsonl".into(),
                train_file: "train.jsonl".into(),
                valid_file: "valid.jsonl".into(),
                train_records: 0,
                valid_records: 0,
                target_size,
                holdout,
            },
            provenance,
        }
    }
}

fn alpaca_lines(ids: &[String], corpus: &Corpus) -> Result<String, CurationError> {
    let mut out = String::new();
    for id in ids {
        let pair = corpus
            .get(id)
            .ok_or_else(|| CurationError::MissingId(id.clone()))?;
        out.push_str(
            &serde_json::to_string(&render_alpaca_record(pair)).expect("alpaca records serialize"),
        );
        out.push('\n');
    }
    Ok(out)
}

/// Writes `train.jsonl`, `valid.jsonl` and `manifest.json` into `out_dir`.
/// Nothing is written if any id is missing or the training split is empty.
pub fn emit_finetune_dataset(
    train: &[String],
    valid: &[String],
    corpus: &Corpus,
    out_dir: &Path,
    mut manifest: FinetuneManifest,
) -> Result<Vec<PathBuf>, CurationError> {
    if train.is_empty() {
        return Err(CurationError::EmptyTrain);
    }
    let train_body = alpaca_lines(train, corpus)?;
    let valid_body = alpaca_lines(valid, corpus)?;
    manifest.data.train_records = train.len();
    manifest.data.valid_records = valid.len();
    let mut manifest_body = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    manifest_body.push('\n');

    let paths = vec![
        out_dir.join(&manifest.data.train_file),
        out_dir.join(&manifest.data.valid_file),
        out_dir.join("manifest.json"),
    ];
    write_atomic(&paths[0], train_body.as_bytes())?;
    write_atomic(&paths[1], valid_body.as_bytes())?;
    write_atomic(&paths[2], manifest_body.as_bytes())?;
    Ok(paths)
}
