use ambimt_core::curation::{
    emit_finetune_dataset, rank_and_interleave, split_validation, FinetuneManifest, Provenance,
};
use ambimt_core::io::sha256_file;
use ambimt_core::Corpus;
use anyhow::{bail, Result};
use serde::Serialize;

use super::{load_corpus, read_index, Outcome};
use crate::manifest::Run;
use crate::CurateArgs;

#[derive(Serialize)]
struct CurateSummary {
    scoreable: usize,
    selected: usize,
    train: usize,
    valid: usize,
    files: Vec<String>,
}

pub fn curate(args: CurateArgs) -> Result<Outcome> {
    if args.size == 0 {
        bail!("--size must be positive");
    }
    let mut run = Run::start("curate", &args, Some(args.seed));
    run.input(&args.corpus)?;
    run.input(&args.index)?;
    let index = read_index(&args.index)?;
    let corpus = Corpus::new(load_corpus(&args.corpus)?);

    let ranking = rank_and_interleave(&corpus, &index, args.size);
    if ranking.selected.len() < args.size {
        log::warn!(
            "only {} scoreable sentences; selecting all of them instead of {}",
            ranking.selected.len(),
            args.size
        );
    }
    let (train, valid) = split_validation(&ranking.selected, args.holdout, args.seed)?;
    let provenance = Provenance {
        corpus_id: index.corpus_id().to_string(),
        index_checksum: sha256_file(&args.index)?,
        seed: args.seed,
        tool_version: ambimt_core::TOOL_VERSION.to_string(),
    };
    std::fs::create_dir_all(&args.out_dir)?;
    let manifest = FinetuneManifest::new(args.size, args.holdout, provenance);
    let paths = emit_finetune_dataset(&train, &valid, &corpus, &args.out_dir, manifest)?;
    for p in &paths {
        run.output(p)?;
    }
    let run_manifest = args
        .manifest
        .clone()
        .unwrap_or_else(|| args.out_dir.join("run.manifest.json"));
    run.finish(Some(&run_manifest))?;

    let summary = CurateSummary {
        scoreable: ranking.by_degree.len(),
        selected: ranking.selected.len(),
        train: train.len(),
        valid: valid.len(),
        files: paths.iter().map(|p| p.display().to_string()).collect(),
    };
    let text = format!(
        "selected {} of {} scoreable sentences: {} train, {} validation -> {}\n",
        summary.selected,
        summary.scoreable,
        summary.train,
        summary.valid,
        args.out_dir.display()
    );
    Ok(Outcome::new(text, &summary))
}
