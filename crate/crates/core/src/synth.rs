//! Seeded synthetic corpora over a small English→Spanish ambiguous lexicon.
//!
//! Every sentence holds exactly one ambiguous noun (sense-annotated) among
//! unambiguous filler words, and its target is the word-by-word translation.
//! Sense counts per lemma are fixed by the skewed weights below, so the first
//! listed sense of each lemma is its most frequent one. Evaluation items are
//! fresh sentences, three quarters of them on a non-dominant sense.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{AnnotatedSentence, AnnotatedToken, EvalItem, ParallelPair, SenseId};
use crate::llm::mock::{LexiconEntry, MockLexicon};

/// (lemma, [(sense suffix, Spanish form)])
const AMBIGUOUS: &[(&str, &[(&str, &str)])] = &[
    ("bank", &[("finance", "banco"), ("river", "orilla")]),
    ("bat", &[("animal", "murciélago"), ("club", "bate")]),
    ("crane", &[("machine", "grúa"), ("bird", "grulla")]),
    (
        "spring",
        &[
            ("season", "primavera"),
            ("coil", "muelle"),
            ("water", "manantial"),
        ],
    ),
    (
        "pitch",
        &[
            ("field", "campo"),
            ("tone", "tono"),
            ("throw", "lanzamiento"),
        ],
    ),
    ("seal", &[("stamp", "sello"), ("animal", "foca")]),
    ("bark", &[("tree", "corteza"), ("dog", "ladrido")]),
    ("match", &[("game", "partido"), ("stick", "cerilla")]),
    (
        "date",
        &[
            ("calendar", "fecha"),
            ("meeting", "cita"),
            ("fruit", "dátil"),
        ],
    ),
    ("plant", &[("flora", "planta"), ("factory", "fábrica")]),
    ("light", &[("lamp", "luz"), ("weight", "ligero")]),
    ("ring", &[("jewel", "anillo"), ("arena", "cuadrilátero")]),
];

const FILLERS: &[(&str, &str)] = &[
    ("we", "nosotros"),
    ("saw", "vimos"),
    ("a", "un"),
    ("big", "grande"),
    ("old", "viejo"),
    ("new", "nuevo"),
    ("near", "cerca"),
    ("there", "allí"),
    ("today", "hoy"),
    ("yesterday", "ayer"),
    ("small", "pequeño"),
    ("quiet", "tranquilo"),
    ("red", "rojo"),
    ("green", "verde"),
    ("every", "cada"),
    ("morning", "mañana"),
    ("they", "ellos"),
    ("found", "encontraron"),
    ("very", "muy"),
    ("again", "nuevamente"),
];

/// Relative weight of each sense by rank.
fn sense_weights(n: usize) -> &'static [u32] {
    match n {
        2 => &[8, 2],
        _ => &[7, 2, 1],
    }
}

/// Largest supported `lemmas` value.
pub const MAX_LEMMAS: usize = AMBIGUOUS.len();

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub sentences: usize,
    pub lemmas: usize,
    pub eval_items: usize,
    pub seed: u64,
    pub src_lang: String,
    pub tgt_lang: String,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            sentences: 500,
            lemmas: 10,
            eval_items: 40,
            seed: 7,
            src_lang: "en".into(),
            tgt_lang: "es".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub corpus: Vec<ParallelPair>,
    pub eval: Vec<EvalItem>,
    /// Covers every ambiguous lemma and filler; `mfs` is the dominant sense.
    pub lexicon: MockLexicon,
}

pub fn sense_id(lemma: &str, suffix: &str) -> SenseId {
    SenseId::new(format!("{lemma}%{suffix}")).expect("static sense ids are valid")
}

/// Per-sense sentence counts for one lemma: proportional to the weights, each
/// sense at least once, summing to `total` whenever `total` covers every sense.
fn allocate(total: usize, senses: usize) -> Vec<usize> {
    let weights = &sense_weights(senses)[..senses];
    let sum: u32 = weights.iter().sum();
    let mut counts: Vec<usize> = weights
        .iter()
        .map(|&w| (total * w as usize / sum as usize).max(1))
        .collect();
    let assigned: usize = counts.iter().sum();
    if assigned < total {
        counts[0] += total - assigned;
    } else {
        counts[0] -= (assigned - total).min(counts[0] - 1);
    }
    counts
}

fn build_sentence(
    rng: &mut ChaCha8Rng,
    id: String,
    lemma: &str,
    sense: SenseId,
    form: &str,
) -> (AnnotatedSentence, String) {
    let n_fillers = rng.random_range(2..=5);
    let mut words: Vec<(&str, &str, Option<SenseId>)> = (0..n_fillers)
        .map(|_| {
            let (w, t) = FILLERS[rng.random_range(0..FILLERS.len())];
            (w, t, None)
        })
        .collect();
    let at = rng.random_range(0..=words.len());
    words.insert(at, (lemma, form, Some(sense)));

    let mut text = String::new();
    let mut tokens = Vec::with_capacity(words.len());
    for (i, (w, _, sense)) in words.iter().enumerate() {
        if i > 0 {
            text.push(' ');
        }
        let start = text.chars().count();
        text.push_str(w);
        tokens.push(AnnotatedToken {
            surface: w.to_string(),
            lemma: w.to_string(),
            pos: if sense.is_some() {
                "NOUN".into()
            } else {
                String::new()
            },
            sense: sense.clone(),
            start,
            end: start + w.chars().count(),
        });
    }
    let target = words
        .iter()
        .map(|(_, t, _)| *t)
        .collect::<Vec<_>>()
        .join(" ");
    (AnnotatedSentence { id, text, tokens }, target)
}

/// Generates a corpus, an evaluation set and the matching mock lexicon.
/// Identical configs give identical output.
pub fn generate(config: &SynthConfig) -> SynthData {
    let lemmas = config.lemmas.clamp(1, MAX_LEMMAS);
    let inventory = &AMBIGUOUS[..lemmas];
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    // (lemma index, sense index) per sentence, then shuffled
    let mut plan = Vec::with_capacity(config.sentences);
    for (li, (_, senses)) in inventory.iter().enumerate() {
        let share = config.sentences / lemmas + usize::from(li < config.sentences % lemmas);
        if share == 0 {
            continue;
        }
        for (si, count) in allocate(share, senses.len()).into_iter().enumerate() {
            plan.extend(std::iter::repeat_n((li, si), count));
        }
    }
    plan.truncate(config.sentences);
    plan.shuffle(&mut rng);

    let width = config.sentences.max(1).to_string().len().max(4);
    let corpus = plan
        .iter()
        .enumerate()
        .map(|(n, &(li, si))| {
            let (lemma, senses) = inventory[li];
            let (suffix, form) = senses[si];
            let (source, target) = build_sentence(
                &mut rng,
                format!("syn-{:0width$}", n + 1),
                lemma,
                sense_id(lemma, suffix),
                form,
            );
            ParallelPair {
                source,
                target,
                src_lang: config.src_lang.clone(),
                tgt_lang: config.tgt_lang.clone(),
            }
        })
        .collect();

    let width = config.eval_items.max(1).to_string().len().max(3);
    let eval = (0..config.eval_items)
        .map(|n| {
            let (lemma, senses) = inventory[n % lemmas];
            // every fourth round targets the dominant sense
            let round = n / lemmas;
            let si = if round % 4 == 3 {
                0
            } else {
                1 + (round - round / 4) % (senses.len() - 1)
            };
            let (suffix, form) = senses[si];
            let (source, _) = build_sentence(
                &mut rng,
                format!("eval-{:0width$}", n + 1),
                lemma,
                sense_id(lemma, suffix),
                form,
            );
            EvalItem {
                id: source.id.clone(),
                source,
                good: vec![form.to_string()],
                bad: senses
                    .iter()
                    .filter(|(_, f)| *f != form)
                    .map(|(_, f)| f.to_string())
                    .collect(),
            }
        })
        .collect();

    let mut lexicon = MockLexicon::default();
    for (lemma, senses) in inventory {
        lexicon.entries.insert(
            lemma.to_string(),
            LexiconEntry {
                mfs: senses[0].1.to_string(),
                senses: senses
                    .iter()
                    .map(|(suffix, form)| {
                        (
                            sense_id(lemma, suffix).as_str().to_string(),
                            form.to_string(),
                        )
                    })
                    .collect(),
            },
        );
    }
    for (w, t) in FILLERS {
        lexicon.entries.insert(
            w.to_string(),
            LexiconEntry {
                mfs: t.to_string(),
                senses: Default::default(),
            },
        );
    }

    SynthData {
        corpus,
        eval,
        lexicon,
    }
}
