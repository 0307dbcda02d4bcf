use std::io::BufRead;
use std::time::Duration;

use ambimt_core::eval::{write_hypotheses, Hypothesis};
use ambimt_core::llm::mock::{MockBackend, MockLexicon, MockReply, MockServer};
use ambimt_core::llm::{
    translate_batch, BatchStats, CompletionBackend, CompletionCache, CompletionRecord,
    DispatchConfig, EndpointConfig, HttpBackend,
};
use ambimt_core::prompt::GenerationParams;
use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use super::{jsonl, open, Outcome, EXIT_DIAGNOSTICS};
use crate::manifest::Run;
use crate::{MockServerArgs, TranslateArgs};

#[derive(Deserialize)]
struct PromptIn {
    id: String,
    prompt: String,
}

#[derive(Serialize)]
struct RecordOut<'a> {
    id: &'a str,
    #[serde(flatten)]
    record: &'a CompletionRecord,
}

#[derive(Serialize)]
struct TranslateSummary {
    model: String,
    #[serde(flatten)]
    stats: BatchStats,
    failed_ids: Vec<String>,
    out: String,
}

pub fn translate(args: TranslateArgs) -> Result<Outcome> {
    let mut run = Run::start("translate", &args, None);
    run.input(&args.prompts)?;
    let params = GenerationParams {
        beam_size: args.beam_size,
        temperature: args.temperature,
        no_repeat_ngram: args.no_repeat_ngram,
        max_new_tokens: args.max_new_tokens,
    };
    params
        .validate()
        .map_err(|e| anyhow!("invalid generation parameters: {e}"))?;
    if !(args.timeout_secs.is_finite() && args.timeout_secs > 0.0) {
        bail!("--timeout-secs must be positive");
    }
    let dispatch = DispatchConfig {
        max_in_flight: args.max_in_flight,
        retry_budget: args.retries,
        backoff: Duration::from_millis(args.backoff_ms),
    };

    let mut prompts = Vec::new();
    for (i, line) in open(&args.prompts)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let p: PromptIn = serde_json::from_str(&line)
            .with_context(|| format!("{}:{}", args.prompts.display(), i + 1))?;
        prompts.push(p);
    }

    let backend: Box<dyn CompletionBackend> = match (&args.mock_lexicon, &args.endpoint) {
        (Some(path), _) => {
            run.input(path)?;
            let lexicon = MockLexicon::load(path)
                .with_context(|| format!("loading lexicon {}", path.display()))?;
            Box::new(MockBackend::new(lexicon, args.mock_behavior))
        }
        (None, Some(url)) => Box::new(HttpBackend::new(EndpointConfig {
            base_url: url.clone(),
            path: args.path.clone(),
            schema: args.schema,
            model: args.model.clone(),
            token_env: args.token_env.clone(),
            timeout: Duration::from_secs_f64(args.timeout_secs),
            dispatch: dispatch.clone(),
        })?),
        (None, None) => bail!("either --endpoint or --mock-lexicon is required"),
    };
    let cache = match &args.cache {
        Some(path) => CompletionCache::open(path)?,
        None => CompletionCache::in_memory(),
    };

    let texts: Vec<String> = prompts.iter().map(|p| p.prompt.clone()).collect();
    let result = translate_batch(&texts, backend.as_ref(), &params, &cache, &dispatch)?;

    let mut hyps = Vec::with_capacity(prompts.len());
    let mut failed_ids = Vec::new();
    for (p, r) in prompts.iter().zip(&result.records) {
        match &r.error {
            None => hyps.push(Hypothesis {
                id: p.id.clone(),
                translation: r.parsed.clone(),
            }),
            Some(e) => {
                log::warn!("{}: {e}", p.id);
                failed_ids.push(p.id.clone());
            }
        }
    }
    run.write(&args.out, write_hypotheses(&hyps).as_bytes())?;
    if let Some(path) = &args.records {
        let rows = prompts.iter().zip(&result.records).map(|(p, r)| RecordOut {
            id: &p.id,
            record: r,
        });
        run.write(path, jsonl(rows).as_bytes())?;
    }
    run.finish(args.manifest.as_deref())?;

    let summary = TranslateSummary {
        model: backend.model_id().to_string(),
        stats: result.stats,
        failed_ids,
        out: args.out.display().to_string(),
    };
    let mut text = format!(
        "{} prompts via {}: {} from cache, {} requests, {} failed -> {}\n",
        summary.stats.prompts,
        summary.model,
        summary.stats.cache_hits,
        summary.stats.requests,
        summary.stats.failures,
        summary.out
    );
    for id in &summary.failed_ids {
        text.push_str(&format!("failed: {id}\n"));
    }
    let exit = if summary.failed_ids.is_empty() {
        0
    } else {
        EXIT_DIAGNOSTICS
    };
    Ok(Outcome::new(text, &summary).with_exit(exit))
}

pub fn mock_server(args: MockServerArgs) -> Result<Outcome> {
    let lexicon = MockLexicon::load(&args.lexicon)
        .with_context(|| format!("loading lexicon {}", args.lexicon.display()))?;
    let server = MockServer::start(&args.addr, MockReply::Translate(lexicon, args.behavior))
        .with_context(|| format!("binding {}", args.addr))?;
    println!(
        "mock model ({}) listening on {}",
        args.behavior,
        server.url()
    );
    server.wait();
    Ok(Outcome::new(String::new(), &serde_json::Value::Null))
}
