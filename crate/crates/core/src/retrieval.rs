//! Same-sense demonstration retrieval.
//!
//! For a query sentence, the sense-bearing token whose lemma is most
//! polysemous is chosen as the target, and up to `k` corpus pairs carrying the
//! same sense are sampled uniformly without replacement. Sampling is driven by
//! a ChaCha generator seeded per call, so identical inputs always produce the
//! same demonstrations in the same order.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::corpus::{AnnotatedSentence, Corpus, ParallelPair, SenseId};
use crate::index::SenseIndex;

/// What to do when fewer than `k` same-sense pairs exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FallbackPolicy {
    /// Use only the matched pairs, possibly fewer than `k`.
    #[default]
    MatchedOnly,
    /// Top up with random corpus pairs.
    PadRandom,
}

impl FromStr for FallbackPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "matched-only" => Ok(FallbackPolicy::MatchedOnly),
            "pad-random" => Ok(FallbackPolicy::PadRandom),
            other => Err(format!(
                "unknown fallback policy {other:?} (expected matched-only or pad-random)"
            )),
        }
    }
}

impl fmt::Display for FallbackPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FallbackPolicy::MatchedOnly => "matched-only",
            FallbackPolicy::PadRandom => "pad-random",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TargetSenseChoice {
    pub token_position: usize,
    pub lemma: String,
    pub sense: SenseId,
    pub degree: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemonstrationSet {
    pub demos: Vec<ParallelPair>,
    pub requested_k: usize,
    /// Number of demos whose source carries the target sense.
    pub matched_k: usize,
    pub fallback_used: bool,
    pub seed: u64,
    pub target: Option<TargetSenseChoice>,
}

impl DemonstrationSet {
    fn empty(k: usize, seed: u64) -> Self {
        DemonstrationSet {
            demos: Vec::new(),
            requested_k: k,
            matched_k: 0,
            fallback_used: false,
            seed,
            target: None,
        }
    }
}

/// Picks the sense-bearing token whose lemma has the highest polysemy degree.
/// Ties go to the more frequent sense, then to the earlier token. Tokens whose
/// lemma is unknown to the index (degree 0) are never chosen.
pub fn select_target_sense(
    sentence: &AnnotatedSentence,
    index: &SenseIndex,
) -> Option<TargetSenseChoice> {
    sentence
        .sense_tokens()
        .filter_map(|(position, token)| {
            let sense = token.sense.as_ref()?;
            let degree = index.polysemy_degree(&token.lemma);
            (degree >= 1).then(|| (degree, index.sense_frequency(sense), position, token, sense))
        })
        .max_by(|a, b| {
            a.0.cmp(&b.0)
                .then(a.1.cmp(&b.1))
                // lower position wins, so reverse
                .then(b.2.cmp(&a.2))
        })
        .map(|(degree, _, position, token, sense)| TargetSenseChoice {
            token_position: position,
            lemma: token.lemma.clone(),
            sense: sense.clone(),
            degree,
        })
}

/// Distinct sentence ids carrying `sense`, in posting order, excluding `exclude`
/// and ids absent from `corpus`.
fn candidates<'a>(
    index: &'a SenseIndex,
    corpus: &Corpus,
    sense: &SenseId,
    exclude: Option<&str>,
) -> Vec<&'a str> {
    let mut seen = BTreeSet::new();
    index
        .postings(sense)
        .iter()
        .map(|p| p.sentence_id.as_str())
        .filter(|id| Some(*id) != exclude && corpus.get(id).is_some() && seen.insert(*id))
        .collect()
}

fn draw<T: Copy>(rng: &mut ChaCha8Rng, pool: &[T], k: usize) -> Vec<T> {
    let amount = k.min(pool.len());
    sample(rng, pool.len(), amount)
        .into_iter()
        .map(|i| pool[i])
        .collect()
}

fn sample_with(
    rng: &mut ChaCha8Rng,
    index: &SenseIndex,
    corpus: &Corpus,
    sense: &SenseId,
    k: usize,
    seed: u64,
    exclude: Option<&str>,
) -> DemonstrationSet {
    let pool = candidates(index, corpus, sense, exclude);
    let demos: Vec<ParallelPair> = draw(rng, &pool, k)
        .into_iter()
        .map(|id| {
            corpus
                .get(id)
                .expect("candidates are in the corpus")
                .clone()
        })
        .collect();
    DemonstrationSet {
        matched_k: demos.len(),
        demos,
        requested_k: k,
        fallback_used: false,
        seed,
        target: None,
    }
}

/// Seed for one query of a run, derived from the run seed and the query id so
/// that a query's demonstrations do not depend on its position in the file.
pub fn query_seed(run_seed: u64, query_id: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(run_seed.to_le_bytes());
    hasher.update(query_id.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Samples up to `k` pairs carrying `sense`, uniformly without replacement.
pub fn sample_demonstrations(
    index: &SenseIndex,
    corpus: &Corpus,
    sense: &SenseId,
    k: usize,
    seed: u64,
    exclude_id: Option<&str>,
) -> DemonstrationSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with(&mut rng, index, corpus, sense, k, seed, exclude_id)
}

/// Appends up to `k - demos.len()` random corpus pairs not yet chosen and not
/// excluded.
fn pad_random(
    rng: &mut ChaCha8Rng,
    corpus: &Corpus,
    set: &mut DemonstrationSet,
    k: usize,
    exclude: Option<&str>,
) {
    if set.demos.len() >= k {
        return;
    }
    let taken: BTreeSet<&str> = set.demos.iter().map(ParallelPair::id).collect();
    let pool: Vec<&ParallelPair> = corpus
        .pairs()
        .iter()
        .filter(|p| Some(p.id()) != exclude && !taken.contains(p.id()))
        .collect();
    let extra: Vec<ParallelPair> = draw(rng, &pool, k - set.demos.len())
        .into_iter()
        .cloned()
        .collect();
    if !extra.is_empty() {
        set.fallback_used = true;
        set.demos.extend(extra);
    }
}

/// Uniform random demonstrations, ignoring senses (the naive k-shot baseline).
pub fn sample_random(
    corpus: &Corpus,
    k: usize,
    seed: u64,
    exclude_id: Option<&str>,
) -> DemonstrationSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = DemonstrationSet::empty(k, seed);
    pad_random(&mut rng, corpus, &mut set, k, exclude_id);
    set.fallback_used = false;
    set
}

/// End-to-end similar-context retrieval for one query sentence.
///
/// Sentences without a usable sense fall back to random pairs (flagged)
/// whatever the policy; otherwise `policy` decides whether a short match list
/// is padded.
pub fn retrieve_similar(
    sentence: &AnnotatedSentence,
    index: &SenseIndex,
    corpus: &Corpus,
    k: usize,
    seed: u64,
    policy: FallbackPolicy,
) -> DemonstrationSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let exclude = Some(sentence.id.as_str());
    match select_target_sense(sentence, index) {
        None => {
            let mut set = DemonstrationSet::empty(k, seed);
            pad_random(&mut rng, corpus, &mut set, k, exclude);
            set
        }
        Some(choice) => {
            let mut set = sample_with(&mut rng, index, corpus, &choice.sense, k, seed, exclude);
            if policy == FallbackPolicy::PadRandom {
                pad_random(&mut rng, corpus, &mut set, k, exclude);
            }
            set.matched_k = set
                .demos
                .iter()
                .filter(|d| d.source.has_sense(&choice.sense))
                .count();
            set.target = Some(choice);
            set
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Coverage {
    pub covered: usize,
    pub eligible: usize,
    pub fraction: f64,
    /// True when no sentence carries a sense; `fraction` is then 0.
    pub zero_denominator: bool,
}

/// Fraction of sense-bearing sentences for which `k` distinct other sentences
/// share the selected target sense.
pub fn coverage_report(corpus: &Corpus, index: &SenseIndex, k: usize) -> Coverage {
    let mut covered = 0;
    let mut eligible = 0;
    for pair in corpus.pairs() {
        if pair.source.sense_tokens().next().is_none() {
            continue;
        }
        eligible += 1;
        let full = match select_target_sense(&pair.source, index) {
            Some(choice) => candidates(index, corpus, &choice.sense, Some(pair.id())).len() >= k,
            None => k == 0,
        };
        if full {
            covered += 1;
        }
    }
    if eligible == 0 {
        return Coverage {
            covered: 0,
            eligible: 0,
            fraction: 0.0,
            zero_denominator: true,
        };
    }
    Coverage {
        covered,
        eligible,
        fraction: covered as f64 / eligible as f64,
        zero_denominator: false,
    }
}
