use ambimt_core::corpus::{
    parse_annotated_corpus, parse_eval_set, validate_corpus, write_corpus, write_eval_set,
};
use ambimt_core::index::{build_index, parse_degree_overrides};
use ambimt_core::retrieval::coverage_report;
use ambimt_core::synth::{generate, SynthConfig, MAX_LEMMAS};
use ambimt_core::Corpus;
use anyhow::{bail, Context, Result};
use serde::Serialize;

use super::{load_corpus, open, read_index, render_diagnostics, Outcome, EXIT_DIAGNOSTICS};
use crate::manifest::Run;
use crate::{CoverageArgs, IndexArgs, IngestArgs, SynthArgs};

#[derive(Serialize)]
struct IngestSummary {
    kind: &'static str,
    records: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    stats: Option<ambimt_core::corpus::ValidationReport>,
    diagnostics: Vec<String>,
}

pub fn ingest(args: IngestArgs) -> Result<Outcome> {
    let mut run = Run::start("ingest", &args, None);
    run.input(&args.corpus)?;
    let (summary, normalized) = if args.eval {
        let (items, diags) = parse_eval_set(open(&args.corpus)?)?;
        let summary = IngestSummary {
            kind: "eval-set",
            records: items.len(),
            stats: None,
            diagnostics: render_diagnostics(&args.corpus, &diags),
        };
        (summary, write_eval_set(&items))
    } else {
        let (pairs, diags) = parse_annotated_corpus(open(&args.corpus)?)?;
        let summary = IngestSummary {
            kind: "corpus",
            records: pairs.len(),
            stats: Some(validate_corpus(&pairs)),
            diagnostics: render_diagnostics(&args.corpus, &diags),
        };
        (summary, write_corpus(&pairs))
    };
    if let Some(out) = &args.out {
        run.write(out, normalized.as_bytes())?;
    }
    run.finish(args.manifest.as_deref())?;

    let mut text = format!("{}: {} records accepted\n", summary.kind, summary.records);
    if let Some(s) = &summary.stats {
        text.push_str(&format!(
            "tokens: {}\nsense-annotated tokens: {}\nlemmas: {}\nlemmas with senses: {}\nsenses: {}\n",
            s.tokens, s.sense_tokens, s.distinct_lemmas, s.distinct_sense_lemmas, s.distinct_senses
        ));
    }
    for d in &summary.diagnostics {
        text.push_str(&format!("diagnostic: {d}\n"));
    }
    let exit = if summary.diagnostics.is_empty() {
        0
    } else {
        EXIT_DIAGNOSTICS
    };
    Ok(Outcome::new(text, &summary).with_exit(exit))
}

#[derive(Serialize)]
struct IndexSummary {
    corpus_id: String,
    sentences: usize,
    lemmas: usize,
    senses: usize,
    sense_tokens: usize,
    overrides: usize,
    out: String,
}

pub fn index(args: IndexArgs) -> Result<Outcome> {
    let mut run = Run::start("index", &args, None);
    run.input(&args.corpus)?;
    let overrides = match &args.degree_overrides {
        Some(path) => {
            run.input(path)?;
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            parse_degree_overrides(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?
        }
        None => Default::default(),
    };
    let pairs = load_corpus(&args.corpus)?;
    let corpus_id = match &args.corpus_id {
        Some(id) => id.clone(),
        None => args
            .corpus
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "corpus".into()),
    };
    let index = build_index(&corpus_id, &pairs).with_degree_overrides(overrides);
    run.write(&args.out, &index.to_bytes())?;
    run.finish(args.manifest.as_deref())?;

    let summary = IndexSummary {
        corpus_id,
        sentences: pairs.len(),
        lemmas: index.lemmas().count(),
        senses: index.senses().count(),
        sense_tokens: index.total_sense_tokens(),
        overrides: index.degree_overrides().len(),
        out: args.out.display().to_string(),
    };
    let text = format!(
        "indexed {} sentences: {} lemmas, {} senses, {} sense tokens -> {}\n",
        summary.sentences, summary.lemmas, summary.senses, summary.sense_tokens, summary.out
    );
    Ok(Outcome::new(text, &summary))
}

pub fn coverage(args: CoverageArgs) -> Result<Outcome> {
    let mut run = Run::start("coverage", &args, None);
    run.input(&args.corpus)?;
    run.input(&args.index)?;
    let index = read_index(&args.index)?;
    let corpus = Corpus::new(load_corpus(&args.corpus)?);
    let report = coverage_report(&corpus, &index, args.k);
    if let Some(out) = &args.out {
        let mut body = serde_json::to_string_pretty(&report)?;
        body.push('\n');
        run.write(out, body.as_bytes())?;
    }
    run.finish(args.manifest.as_deref())?;
    let text = format!(
        "{}-shot coverage: {}/{} = {:.4}{}\n",
        args.k,
        report.covered,
        report.eligible,
        report.fraction,
        if report.zero_denominator {
            " (no sense-annotated sentences)"
        } else {
            ""
        }
    );
    Ok(Outcome::new(text, &report))
}

#[derive(Serialize)]
struct SynthSummary {
    sentences: usize,
    eval_items: usize,
    lexicon_entries: usize,
    files: Vec<String>,
}

pub fn synth(args: SynthArgs) -> Result<Outcome> {
    if args.lemmas == 0 || args.lemmas > MAX_LEMMAS {
        bail!("--lemmas must be between 1 and {MAX_LEMMAS}");
    }
    let mut run = Run::start("synth", &args, Some(args.seed));
    let data = generate(&SynthConfig {
        sentences: args.sentences,
        lemmas: args.lemmas,
        eval_items: args.eval_items,
        seed: args.seed,
        ..SynthConfig::default()
    });
    let files = [
        (
            args.out_dir.join("corpus.jsonl"),
            write_corpus(&data.corpus),
        ),
        (args.out_dir.join("eval.jsonl"), write_eval_set(&data.eval)),
        (
            args.out_dir.join("lexicon.json"),
            data.lexicon.to_json() + "\n",
        ),
    ];
    for (path, body) in &files {
        run.write(path, body.as_bytes())?;
    }
    run.finish(args.manifest.as_deref())?;
    let summary = SynthSummary {
        sentences: data.corpus.len(),
        eval_items: data.eval.len(),
        lexicon_entries: data.lexicon.entries.len(),
        files: files.iter().map(|(p, _)| p.display().to_string()).collect(),
    };
    let text = format!(
        "wrote {} sentences, {} evaluation items and a {}-entry lexicon to {}\n",
        summary.sentences,
        summary.eval_items,
        summary.lexicon_entries,
        args.out_dir.display()
    );
    Ok(Outcome::new(text, &summary))
}
