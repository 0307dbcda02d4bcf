use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;
use std::path::Path;

use ambimt_core::corpus::{corpus_record_line, parse_corpus_line};
use ambimt_core::prompt::{language_name, PromptTemplate, TemplateKind};
use ambimt_core::retrieval::{query_seed, retrieve_similar, sample_random, TargetSenseChoice};
use ambimt_core::{Corpus, ParallelPair};
use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use super::{jsonl, load_corpus, load_queries, open, read_index, Outcome};
use crate::manifest::Run;
use crate::{PromptArgs, RetrieveArgs, Strategy};

/// One line of a demonstrations file. Each demo is a full corpus record.
#[derive(Serialize, Deserialize)]
pub struct DemoLine {
    pub query_id: String,
    pub strategy: Strategy,
    pub requested_k: usize,
    pub matched_k: usize,
    pub fallback_used: bool,
    pub seed: u64,
    pub target: Option<TargetOut>,
    pub demos: Vec<Box<RawValue>>,
}

#[derive(Serialize, Deserialize)]
pub struct TargetOut {
    pub lemma: String,
    pub sense: String,
    pub degree: usize,
    pub token_position: usize,
}

impl From<&TargetSenseChoice> for TargetOut {
    fn from(c: &TargetSenseChoice) -> Self {
        TargetOut {
            lemma: c.lemma.clone(),
            sense: c.sense.as_str().to_string(),
            degree: c.degree,
            token_position: c.token_position,
        }
    }
}

#[derive(Serialize)]
struct RetrieveSummary {
    queries: usize,
    strategy: Strategy,
    requested_k: usize,
    mean_matched_k: f64,
    /// matched_k → number of queries
    matched_k_histogram: BTreeMap<usize, usize>,
    short_of_k: usize,
    fallback_used: usize,
    no_target: usize,
    out: String,
}

pub fn retrieve(args: RetrieveArgs) -> Result<Outcome> {
    let mut run = Run::start("retrieve", &args, Some(args.seed));
    run.input(&args.corpus)?;
    run.input(&args.queries)?;
    let index = match (&args.index, args.strategy) {
        (Some(path), _) => {
            run.input(path)?;
            Some(read_index(path)?)
        }
        (None, Strategy::Similar) => bail!("--index is required for the similar strategy"),
        (None, Strategy::Random) => None,
    };
    let corpus = Corpus::new(load_corpus(&args.corpus)?);
    let queries = load_queries(&args.queries)?;

    let mut lines = Vec::with_capacity(queries.len());
    let mut summary = RetrieveSummary {
        queries: queries.len(),
        strategy: args.strategy,
        requested_k: args.k,
        mean_matched_k: 0.0,
        matched_k_histogram: BTreeMap::new(),
        short_of_k: 0,
        fallback_used: 0,
        no_target: 0,
        out: args.out.display().to_string(),
    };
    for query in &queries {
        let seed = query_seed(args.seed, &query.id);
        let set = match (&index, args.strategy) {
            (Some(index), Strategy::Similar) => {
                retrieve_similar(query, index, &corpus, args.k, seed, args.policy)
            }
            _ => sample_random(&corpus, args.k, seed, Some(&query.id)),
        };
        *summary
            .matched_k_histogram
            .entry(set.matched_k)
            .or_default() += 1;
        summary.mean_matched_k += set.matched_k as f64;
        summary.short_of_k += usize::from(set.demos.len() < args.k);
        summary.fallback_used += usize::from(set.fallback_used);
        summary.no_target +=
            usize::from(args.strategy == Strategy::Similar && set.target.is_none());
        lines.push(DemoLine {
            query_id: query.id.clone(),
            strategy: args.strategy,
            requested_k: set.requested_k,
            matched_k: set.matched_k,
            fallback_used: set.fallback_used,
            seed,
            target: set.target.as_ref().map(TargetOut::from),
            demos: set
                .demos
                .iter()
                .map(|d| {
                    RawValue::from_string(corpus_record_line(d)).expect("corpus lines are JSON")
                })
                .collect(),
        });
    }
    if !queries.is_empty() {
        summary.mean_matched_k /= queries.len() as f64;
    }
    run.write(&args.out, jsonl(&lines).as_bytes())?;
    run.finish(args.manifest.as_deref())?;

    let mut text = format!(
        "{} queries, {} strategy, k = {}: mean matched_k {:.3}, {} short of k, {} with fallback",
        summary.queries,
        summary.strategy_name(),
        summary.requested_k,
        summary.mean_matched_k,
        summary.short_of_k,
        summary.fallback_used
    );
    if args.strategy == Strategy::Similar {
        text.push_str(&format!(", {} without a target sense", summary.no_target));
    }
    text.push('\n');
    for (k, n) in &summary.matched_k_histogram {
        text.push_str(&format!("  matched_k = {k}: {n}\n"));
    }
    Ok(Outcome::new(text, &summary))
}

impl RetrieveSummary {
    fn strategy_name(&self) -> &'static str {
        match self.strategy {
            Strategy::Similar => "similar",
            Strategy::Random => "random",
        }
    }
}

pub fn read_demos(path: &Path) -> Result<HashMap<String, Vec<ParallelPair>>> {
    let mut out = HashMap::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.with_context(|| format!("reading {}", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        let at = || format!("{}:{}", path.display(), i + 1);
        let parsed: DemoLine = serde_json::from_str(&line).with_context(at)?;
        let demos = parsed
            .demos
            .iter()
            .map(|raw| {
                parse_corpus_line(raw.get()).map_err(|e| anyhow!("{}: demonstration: {e}", at()))
            })
            .collect::<Result<Vec<_>>>()?;
        if out.insert(parsed.query_id.clone(), demos).is_some() {
            bail!("{}: duplicate query id {:?}", at(), parsed.query_id);
        }
    }
    Ok(out)
}

pub fn resolve_template(spec: &str) -> Result<PromptTemplate> {
    if let Ok(kind) = spec.parse::<TemplateKind>() {
        return Ok(PromptTemplate::builtin(kind));
    }
    let text = std::fs::read_to_string(spec)
        .with_context(|| format!("{spec:?} is neither a built-in template nor a readable file"))?;
    PromptTemplate::parse(&text).with_context(|| format!("parsing template {spec}"))
}

#[derive(Serialize)]
pub struct PromptLine {
    pub id: String,
    pub prompt: String,
}

#[derive(Serialize)]
struct PromptSummary {
    prompts: usize,
    zero_shot: usize,
    mean_demos: f64,
    src_lang: String,
    tgt_lang: String,
    out: String,
}

pub fn prompt(args: PromptArgs) -> Result<Outcome> {
    let mut run = Run::start("prompt", &args, None);
    run.input(&args.queries)?;
    let template = resolve_template(&args.template)?;
    if Path::new(&args.template).is_file() {
        run.input(Path::new(&args.template))?;
    }
    let demos = match &args.demos {
        Some(path) => {
            run.input(path)?;
            read_demos(path)?
        }
        None => HashMap::new(),
    };
    let queries = load_queries(&args.queries)?;

    let first_demo = demos.values().flatten().next();
    let src = args
        .src_lang
        .clone()
        .or_else(|| first_demo.map(|d| d.src_lang.clone()))
        .ok_or_else(|| {
            anyhow!("no demonstrations to take the source language from; pass --src-lang")
        })?;
    let tgt = args
        .tgt_lang
        .clone()
        .or_else(|| first_demo.map(|d| d.tgt_lang.clone()))
        .ok_or_else(|| {
            anyhow!("no demonstrations to take the target language from; pass --tgt-lang")
        })?;

    let mut lines = Vec::with_capacity(queries.len());
    let mut total_demos = 0;
    let mut zero_shot = 0;
    for query in &queries {
        let pairs: Vec<(String, String)> = match (&args.demos, demos.get(&query.id)) {
            (Some(path), None) => bail!(
                "{}: no demonstrations for query {:?}",
                path.display(),
                query.id
            ),
            (_, Some(list)) => list
                .iter()
                .map(|d| (d.source.text.clone(), d.target.clone()))
                .collect(),
            (None, None) => Vec::new(),
        };
        total_demos += pairs.len();
        zero_shot += usize::from(pairs.is_empty());
        let prompt = template
            .render(
                &pairs,
                &query.text,
                language_name(&src),
                language_name(&tgt),
            )
            .with_context(|| format!("rendering prompt for {:?}", query.id))?;
        lines.push(PromptLine {
            id: query.id.clone(),
            prompt,
        });
    }
    run.write(&args.out, jsonl(&lines).as_bytes())?;
    run.finish(args.manifest.as_deref())?;

    let summary = PromptSummary {
        prompts: lines.len(),
        zero_shot,
        mean_demos: if lines.is_empty() {
            0.0
        } else {
            total_demos as f64 / lines.len() as f64
        },
        src_lang: src,
        tgt_lang: tgt,
        out: args.out.display().to_string(),
    };
    let text = format!(
        "{} prompts ({} zero-shot, {:.2} demonstrations on average) -> {}\n",
        summary.prompts, summary.zero_shot, summary.mean_demos, summary.out
    );
    Ok(Outcome::new(text, &summary))
}
