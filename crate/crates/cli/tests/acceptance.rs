//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any criterion fails.
//!
//!     cargo test -p ambimt-cli --test acceptance

mod common;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ambimt_core::corpus::{write_corpus, Corpus};
use ambimt_core::curation::{rank_and_interleave, score_sentence};
use ambimt_core::eval::stats::{pearson, StatsError};
use ambimt_core::eval::{evaluate_run, judge, Hypothesis, MatchMode, MissPolicy, VerdictKind};
use ambimt_core::index::build_index;
use ambimt_core::llm::mock::{mock_translate, MockBehavior, MockLexicon};
use ambimt_core::prompt::{parse_completion, render_prompt, PromptSpec, TemplateKind};
use ambimt_core::retrieval::{query_seed, retrieve_similar, sample_random, FallbackPolicy};
use ambimt_core::synth::{generate, SynthConfig};
use ambimt_core::{AnnotatedSentence, AnnotatedToken, EvalItem, ParallelPair, SenseId};

const PEARSON_20: &str = include_str!("../../core/tests/fixtures/pearson_20.tsv");

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || {
        format!("took {elapsed:.2?}, limit {limit:?}")
    })
}

/// Random corpus over lemmas `w0..w{lemmas}` with senses `wL%0..wL%{senses}`.
fn random_corpus(
    rng: &mut ChaCha8Rng,
    max_sentences: usize,
    lemmas: u8,
    senses: u8,
) -> Vec<ParallelPair> {
    let n = rng.random_range(0..=max_sentences);
    (0..n)
        .map(|i| {
            let len = rng.random_range(1..=6);
            let spec: Vec<(u8, Option<u8>)> = (0..len)
                .map(|_| {
                    let lemma = rng.random_range(0..lemmas);
                    let sense = rng.random_bool(0.6).then(|| rng.random_range(0..senses));
                    (lemma, sense)
                })
                .collect();
            pair(&format!("s{i:03}"), &spec)
        })
        .collect()
}

fn pair(id: &str, spec: &[(u8, Option<u8>)]) -> ParallelPair {
    let mut text = String::new();
    let mut tokens = Vec::new();
    for (i, &(lemma, sense)) in spec.iter().enumerate() {
        if i > 0 {
            text.push(' ');
        }
        let surface = format!("w{lemma}");
        let start = text.len();
        text.push_str(&surface);
        tokens.push(AnnotatedToken {
            lemma: surface.clone(),
            end: start + surface.len(),
            surface,
            pos: String::new(),
            sense: sense.map(|s| SenseId::new(format!("w{lemma}%{s}")).unwrap()),
            start,
        });
    }
    ParallelPair {
        source: AnnotatedSentence {
            id: id.into(),
            text,
            tokens,
        },
        target: format!("t {id}"),
        src_lang: "en".into(),
        tgt_lang: "es".into(),
    }
}

fn index_oracle() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut checked = 0;
    for c in 0..100 {
        let pairs = random_corpus(&mut rng, 50, 8, 4);
        let index = build_index("gen", &pairs);
        let mut lemma_senses: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        let mut freq: BTreeMap<String, usize> = BTreeMap::new();
        for p in &pairs {
            for t in &p.source.tokens {
                if let Some(s) = &t.sense {
                    lemma_senses
                        .entry(t.lemma.clone())
                        .or_default()
                        .insert(s.to_string());
                    *freq.entry(s.to_string()).or_default() += 1;
                }
            }
        }
        for l in 0..8 {
            let lemma = format!("w{l}");
            let want = lemma_senses.get(&lemma).map_or(0, BTreeSet::len);
            let got = index.polysemy_degree(&lemma);
            ensure(got == want, || {
                format!("corpus {c}: degree({lemma}) = {got}, recount {want}")
            })?;
            for s in 0..4 {
                let sense = format!("w{l}%{s}");
                let want = freq.get(&sense).copied().unwrap_or(0);
                let got = index.sense_frequency(&SenseId::new(sense.clone()).unwrap());
                ensure(got == want, || {
                    format!("corpus {c}: freq({sense}) = {got}, recount {want}")
                })?;
                checked += 1;
            }
        }
    }
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!(
        "100 corpora, {checked} sense counts, {:.2?}",
        start.elapsed()
    ))
}

fn retrieval_soundness() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut queries = 0;
    while queries < 1000 {
        let pairs = random_corpus(&mut rng, 40, 5, 3);
        if pairs.is_empty() {
            continue;
        }
        let index = build_index("gen", &pairs);
        let corpus = Corpus::new(pairs.clone());
        for q in pairs.iter().take(1000 - queries) {
            queries += 1;
            let k = rng.random_range(0..=5);
            let seed = rng.random::<u64>();
            let policy = if rng.random_bool(0.5) {
                FallbackPolicy::PadRandom
            } else {
                FallbackPolicy::MatchedOnly
            };
            let set = retrieve_similar(&q.source, &index, &corpus, k, seed, policy);
            ensure(set.demos.iter().all(|d| d.id() != q.id()), || {
                format!("query {} retrieved itself", q.id())
            })?;
            if let Some(target) = &set.target {
                let matched = set
                    .demos
                    .iter()
                    .filter(|d| d.source.has_sense(&target.sense))
                    .count();
                ensure(matched == set.matched_k, || {
                    format!("query {}: matched_k mismatch", q.id())
                })?;
                if !set.fallback_used {
                    ensure(matched == set.demos.len(), || {
                        format!("query {}: demo without {}", q.id(), target.sense)
                    })?;
                }
            }
            let again = retrieve_similar(&q.source, &index, &corpus, k, seed, policy);
            ensure(again == set, || {
                format!("query {}: same seed, different demos", q.id())
            })?;
        }
    }

    // five candidates for the query's sense, k = 1
    let mut pairs = vec![pair("q", &[(0, Some(0))])];
    pairs.extend((0..5).map(|i| pair(&format!("c{i}"), &[(0, Some(0)), (1, None)])));
    pairs.extend((0..5).map(|i| pair(&format!("o{i}"), &[(0, Some(1))])));
    let index = build_index("uniform", &pairs);
    let corpus = Corpus::new(pairs.clone());
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for seed in 0..10_000u64 {
        let set = retrieve_similar(
            &pairs[0].source,
            &index,
            &corpus,
            1,
            seed,
            FallbackPolicy::MatchedOnly,
        );
        ensure(set.demos.len() == 1, || {
            format!("seed {seed}: {} demos", set.demos.len())
        })?;
        *counts.entry(set.demos[0].id().to_string()).or_default() += 1;
    }
    ensure(counts.len() == 5, || {
        format!("drew from {:?}", counts.keys().collect::<Vec<_>>())
    })?;
    let shares: Vec<f64> = counts.values().map(|&c| c as f64 / 10_000.0).collect();
    ensure(shares.iter().all(|s| (s - 0.2).abs() <= 0.05), || {
        format!("shares {shares:?}")
    })?;
    Ok(format!(
        "{queries} queries sound and repeatable; shares {shares:.3?}"
    ))
}

fn curation_law() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for c in 0..200 {
        let pairs = random_corpus(&mut rng, 40, 6, 4);
        let n = rng.random_range(0..50);
        let index = build_index("gen", &pairs);
        let scoreable = pairs
            .iter()
            .filter(|p| p.source.sense_tokens().next().is_some())
            .count();
        let mut shuffled = pairs.clone();
        shuffled.shuffle(&mut rng);
        let corpus = Corpus::new(pairs);
        let ranking = rank_and_interleave(&corpus, &index, n);
        ensure(ranking.selected.len() == n.min(scoreable), || {
            format!(
                "corpus {c}: |selected| = {}, want {}",
                ranking.selected.len(),
                n.min(scoreable)
            )
        })?;
        let chosen: HashSet<&String> = ranking.selected.iter().collect();
        ensure(chosen.len() == ranking.selected.len(), || {
            format!("corpus {c}: duplicate selection")
        })?;
        let permuted = rank_and_interleave(&Corpus::new(shuffled), &index, n);
        ensure(permuted == ranking, || {
            format!("corpus {c}: selection depends on corpus order")
        })?;

        let score = |id: &str| score_sentence(&corpus.get(id).unwrap().source, &index).unwrap();
        let left: Vec<_> = ranking
            .by_degree
            .iter()
            .filter(|id| !chosen.contains(id))
            .map(|id| score(id))
            .collect();
        for id in &ranking.selected {
            let s = score(id);
            let justified = left.iter().all(|u| s.max_degree >= u.max_degree)
                || left.iter().all(|u| s.min_freq <= u.min_freq);
            ensure(justified, || {
                format!("corpus {c}: {id} outranked on both scores by an unselected sentence")
            })?;
        }
    }

    // the two rankings put disjoint sets first: "h*" lead by degree, "r*" by rarity
    let mut pairs = Vec::new();
    for i in 0..6 {
        pairs.push(pair(&format!("h{i}"), &[(0, Some((i % 4) as u8))]));
        pairs.push(pair(&format!("h{}", i + 6), &[(0, Some((i % 4) as u8))]));
    }
    for i in 0..6u8 {
        pairs.push(pair(&format!("r{i}"), &[(10 + i, Some(0))]));
    }
    let index = build_index("disjoint", &pairs);
    let ranking = rank_and_interleave(&Corpus::new(pairs), &index, 8);
    let want: Vec<String> = (0..4)
        .flat_map(|i| [ranking.by_degree[i].clone(), ranking.by_rarity[i].clone()])
        .collect();
    ensure(ranking.selected == want, || {
        format!("interleave {:?}, want {want:?}", ranking.selected)
    })?;
    ensure(
        ranking
            .selected
            .iter()
            .step_by(2)
            .all(|id| id.starts_with('h'))
            && ranking
                .selected
                .iter()
                .skip(1)
                .step_by(2)
                .all(|id| id.starts_with('r')),
        || format!("interleave {:?}", ranking.selected),
    )?;
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!(
        "200 corpora plus interleave fixture, {:.2?}",
        start.elapsed()
    ))
}

fn prompt_for(demos: &[ParallelPair], source: &str) -> String {
    render_prompt(&PromptSpec {
        demos: demos
            .iter()
            .map(|d| (d.source.text.clone(), d.target.clone()))
            .collect(),
        test_source: source.to_string(),
        src_lang: "English".into(),
        tgt_lang: "Spanish".into(),
        template: TemplateKind::Completion,
    })
    .expect("completion template renders")
}

fn run_accuracy(hyps: Vec<Hypothesis>, items: &[EvalItem]) -> Result<f64, String> {
    let report = evaluate_run(&hyps, items, MissPolicy::Exclude, MatchMode::Auto)
        .map_err(|e| e.to_string())?;
    Ok(report.accuracy)
}

/// Probability that the copy-from-demo mock gets `item` right with `k` demos
/// drawn uniformly without replacement from `corpus`. Each demo is one of:
/// carries the item's sense (A), carries another sense of the word (B), or
/// lacks the word (C). Every ordered category sequence is enumerated with its
/// exact probability.
fn random_hit_probability(
    item: &EvalItem,
    corpus: &[ParallelPair],
    lexicon: &MockLexicon,
    k: usize,
) -> f64 {
    let token = item.ambiguous_token();
    let word = token.lemma.as_str();
    let sense = token.sense.as_ref().unwrap();
    let (mut a, mut b) = (0usize, 0usize);
    for p in corpus {
        let with_word: Vec<&AnnotatedToken> =
            p.source.tokens.iter().filter(|t| t.lemma == word).collect();
        if with_word.is_empty() {
            continue;
        }
        if with_word.iter().any(|t| t.sense.as_ref() == Some(sense)) {
            a += 1;
        } else {
            b += 1;
        }
    }
    let total = corpus.len();
    let c = total - a - b;
    let fallback_hits = item
        .good
        .iter()
        .any(|g| lexicon.get(word).is_some_and(|e| &e.mfs == g));

    let mut p_hit = 0.0;
    for code in 0..3usize.pow(k as u32) {
        let seq: Vec<usize> = (0..k).map(|i| code / 3usize.pow(i as u32) % 3).collect();
        let mut left = [a, b, c];
        let mut remaining = total;
        let mut p = 1.0;
        for &cat in &seq {
            if left[cat] == 0 {
                p = 0.0;
                break;
            }
            p *= left[cat] as f64 / remaining as f64;
            left[cat] -= 1;
            remaining -= 1;
        }
        let hit = match seq.iter().find(|&&cat| cat != 2) {
            Some(&first) => first == 0,
            None => fallback_hits,
        };
        if hit {
            p_hit += p;
        }
    }
    p_hit
}

fn similar_context_efficacy() -> Check {
    let data = generate(&SynthConfig {
        sentences: 500,
        lemmas: 10,
        eval_items: 40,
        ..SynthConfig::default()
    });
    let index = build_index("synth", &data.corpus);
    let corpus = Corpus::new(data.corpus.clone());
    let translate = |demos: &[ParallelPair], item: &EvalItem| Hypothesis {
        id: item.id.clone(),
        translation: parse_completion(&mock_translate(
            &prompt_for(demos, &item.source.text),
            &data.lexicon,
            MockBehavior::CopyFromDemo,
        )),
    };

    let similar: Vec<Hypothesis> = data
        .eval
        .iter()
        .map(|item| {
            let set = retrieve_similar(
                &item.source,
                &index,
                &corpus,
                3,
                query_seed(1, &item.id),
                FallbackPolicy::MatchedOnly,
            );
            translate(&set.demos, item)
        })
        .collect();
    let similar_acc = run_accuracy(similar, &data.eval)?;
    ensure(similar_acc == 1.0, || {
        format!("similar 3-shot accuracy {similar_acc}")
    })?;

    let expected = data
        .eval
        .iter()
        .map(|item| random_hit_probability(item, &data.corpus, &data.lexicon, 3))
        .sum::<f64>()
        / data.eval.len() as f64;
    const RUNS: u64 = 200;
    let mut sum = 0.0;
    for run in 0..RUNS {
        let hyps: Vec<Hypothesis> = data
            .eval
            .iter()
            .map(|item| {
                translate(
                    &sample_random(&corpus, 3, query_seed(run, &item.id), None).demos,
                    item,
                )
            })
            .collect();
        sum += run_accuracy(hyps, &data.eval)?;
    }
    let random_acc = sum / RUNS as f64;
    ensure((random_acc - expected).abs() <= 0.05, || {
        format!("random 3-shot accuracy {random_acc:.4}, oracle expectation {expected:.4}")
    })?;
    ensure(random_acc < 1.0 && expected < 1.0, || {
        "random baseline reached 1.0".into()
    })?;
    Ok(format!(
        "similar {similar_acc:.3}; random {random_acc:.4} (mean of {RUNS} runs) vs oracle {expected:.4}"
    ))
}

fn parsing_conformance() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let alphabet: Vec<char> = "ab Z9\n\r\t\u{0}é火焰<>{}\\\"\u{2028}\u{85}"
        .chars()
        .collect();
    for i in 0..10_000 {
        let len = rng.random_range(0..40);
        let raw: String = (0..len)
            .map(|_| {
                if rng.random_bool(0.1) {
                    char::from_u32(rng.random_range(0..0x11_0000)).unwrap_or('?')
                } else {
                    *alphabet.choose(&mut rng).unwrap()
                }
            })
            .collect();
        let parsed = parse_completion(&raw);
        let prefix = match raw.find('\n') {
            Some(at) => &raw[..at],
            None => raw.as_str(),
        };
        ensure(!parsed.contains('\n'), || {
            format!("case {i}: newline in {parsed:?}")
        })?;
        ensure(parsed == prefix, || {
            format!("case {i}: {raw:?} parsed as {parsed:?}")
        })?;
    }
    Ok("10000 fuzzed completions".into())
}

fn pearson_correctness() -> Check {
    let x: Vec<f64> = (0..25).map(|i| i as f64 * 0.37 - 3.0).collect();
    let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
    let r = pearson(&x, &y).map_err(|e| e.to_string())?;
    ensure((r.rho - 1.0).abs() <= 1e-12, || {
        format!("rho(x, 2x+1) = {}", r.rho)
    })?;

    let rows: Vec<(f64, f64)> = PEARSON_20
        .lines()
        .skip(1)
        .map(|l| {
            let (a, b) = l.split_once('\t').unwrap();
            (a.trim().parse().unwrap(), b.trim().parse().unwrap())
        })
        .collect();
    let (fx, fy): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
    let xy = pearson(&fx, &fy).map_err(|e| e.to_string())?;
    let yx = pearson(&fy, &fx).map_err(|e| e.to_string())?;
    ensure(xy.rho == yx.rho && xy.p_value == yx.p_value, || {
        format!("asymmetric: {xy:?} vs {yx:?}")
    })?;
    // 50-digit reference values, see core/tests/oracles/pearson_oracle.py
    let (rho, p) = (-0.281_773_248_952_333_254_29, 0.228_757_486_316_788_850_47);
    ensure(
        xy.n == 20 && (xy.rho - rho).abs() <= 1e-9 && (xy.p_value - p).abs() <= 1e-9,
        || format!("fixture gave rho {} p {}", xy.rho, xy.p_value),
    )?;

    let constant = vec![0.5; 20];
    ensure(
        matches!(pearson(&constant, &fy), Err(StatsError::Constant)),
        || "constant x accepted".into(),
    )?;
    ensure(
        matches!(pearson(&fx, &constant), Err(StatsError::Constant)),
        || "constant y accepted".into(),
    )?;
    Ok(format!(
        "rho(x, 2x+1) = {}, fixture rho {:.12} p {:.12}",
        r.rho, xy.rho, xy.p_value
    ))
}

fn blaze_item() -> EvalItem {
    let text = "The horse had a blaze between its eyes.";
    let mut p = pair("blaze", &[]);
    p.source.text = text.into();
    p.source.tokens = vec![AnnotatedToken {
        surface: "blaze".into(),
        lemma: "blaze".into(),
        pos: "NOUN".into(),
        sense: Some(SenseId::new("blaze%marking").unwrap()),
        start: 16,
        end: 21,
    }];
    EvalItem {
        id: "blaze".into(),
        source: p.source,
        good: vec!["白线".into()],
        bad: vec!["火焰".into()],
    }
}

fn evaluation_partition() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let vocab = [
        "orilla", "banco", "bate", "grúa", "luz", "campo", "白线", "火焰",
    ];
    for run in 0..500 {
        let n = rng.random_range(0..30);
        let items: Vec<EvalItem> = (0..n)
            .map(|i| {
                let mut it = blaze_item();
                it.id = format!("i{i}");
                let mut words = vocab.to_vec();
                words.shuffle(&mut rng);
                let g = rng.random_range(1..=3);
                let b = rng.random_range(0..=3);
                it.good = words[..g].iter().map(|s| s.to_string()).collect();
                it.bad = words[g..g + b].iter().map(|s| s.to_string()).collect();
                it
            })
            .collect();
        let mut hyps = Vec::new();
        for it in &items {
            if rng.random_bool(0.85) {
                let words: Vec<&str> = (0..rng.random_range(0..4))
                    .map(|_| *vocab.choose(&mut rng).unwrap())
                    .collect();
                hyps.push(Hypothesis {
                    id: it.id.clone(),
                    translation: words.join(" "),
                });
            }
        }
        let ex = evaluate_run(&hyps, &items, MissPolicy::Exclude, MatchMode::Auto)
            .map_err(|e| e.to_string())?;
        let ce = evaluate_run(&hyps, &items, MissPolicy::CountAsError, MatchMode::Auto)
            .map_err(|e| e.to_string())?;
        ensure(ex.hits + ex.errors + ex.misses == items.len(), || {
            format!("run {run}: partition broken")
        })?;
        ensure(ex.accuracy >= ce.accuracy, || {
            format!(
                "run {run}: exclude {} < count-as-error {}",
                ex.accuracy, ce.accuracy
            )
        })?;
    }
    let item = blaze_item();
    let hit = judge("这匹马的眼睛之间有一道白线。", &item, MatchMode::Auto);
    let error = judge("那匹马的两眼之间有一团火焰。", &item, MatchMode::Auto);
    ensure(
        hit.kind == VerdictKind::Hit && hit.matched.as_deref() == Some("白线"),
        || format!("{hit:?}"),
    )?;
    ensure(
        error.kind == VerdictKind::Error && error.matched.as_deref() == Some("火焰"),
        || format!("{error:?}"),
    )?;
    Ok("500 generated runs; blaze Hit/Error".into())
}

fn end_to_end_golden() -> Check {
    let start = Instant::now();
    let run = common::run_pipeline();
    let elapsed = start.elapsed();
    let mismatches = common::golden_mismatches(run.dir.path());
    ensure(mismatches.is_empty(), || {
        format!("differs from golden: {}", mismatches.join(", "))
    })?;
    ensure(run.cached_rerun_requests == 0, || {
        format!("cached rerun sent {} requests", run.cached_rerun_requests)
    })?;
    within(elapsed, Duration::from_secs(60))?;
    Ok(format!(
        "{} files byte-identical, {elapsed:.2?}",
        common::GOLDEN_FILES.len()
    ))
}

fn manifest_fidelity() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = generate(&SynthConfig {
        sentences: 600,
        ..SynthConfig::default()
    });
    std::fs::write(dir.path().join("corpus.jsonl"), write_corpus(&data.corpus))
        .map_err(|e| e.to_string())?;
    common::ok(
        dir.path(),
        &["index", "--corpus", "corpus.jsonl", "--out", "corpus.index"],
    );
    common::ok(
        dir.path(),
        &[
            "curate",
            "--corpus",
            "corpus.jsonl",
            "--index",
            "corpus.index",
            "--size",
            "600",
            "--seed",
            "3",
            "--out-dir",
            "ft",
        ],
    );
    let text =
        std::fs::read_to_string(dir.path().join("ft/manifest.json")).map_err(|e| e.to_string())?;
    let m: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let checks: [(&str, serde_json::Value); 8] = [
        ("/lora/rank", 8.into()),
        ("/lora/alpha", 8.into()),
        ("/lora/dropout", 0.05.into()),
        ("/training/effective_batch_size", 32.into()),
        ("/training/learning_rate", 3e-4.into()),
        ("/training/max_length", 256.into()),
        ("/training/epochs", 5.into()),
        ("/data/holdout", 500.into()),
    ];
    for (path, want) in &checks {
        let got = m.pointer(path);
        ensure(got == Some(want), || {
            format!("{path} = {got:?}, want {want}")
        })?;
    }
    let valid =
        std::fs::read_to_string(dir.path().join("ft/valid.jsonl")).map_err(|e| e.to_string())?;
    ensure(valid.lines().count() == 500, || {
        format!("{} validation records", valid.lines().count())
    })?;
    Ok(
        "rank 8, alpha 8, dropout 0.05, batch 32, lr 3e-4, max length 256, 5 epochs, holdout 500"
            .into(),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Check); 9] = [
        ("index oracle equivalence", index_oracle),
        ("retrieval soundness and determinism", retrieval_soundness),
        ("curation law", curation_law),
        ("similar-context efficacy", similar_context_efficacy),
        ("output parsing conformance", parsing_conformance),
        ("pearson correctness", pearson_correctness),
        ("evaluation partition", evaluation_partition),
        ("end-to-end golden run", end_to_end_golden),
        ("fine-tune manifest fidelity", manifest_fidelity),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
