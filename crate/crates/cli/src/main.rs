//! `ambimt`: ingest → index → retrieve → prompt → translate → evaluate →
//! correlate, plus curate.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use ambimt_core::eval::{MatchMode, MissPolicy};
use ambimt_core::llm::mock::MockBehavior;
use ambimt_core::llm::WireSchema;
use ambimt_core::prompt::GenerationParams;
use ambimt_core::retrieval::FallbackPolicy;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(
    name = "ambimt",
    version,
    about = "Sense-aware demonstration retrieval, prompting and evaluation for LLM translation"
)]
struct Cli {
    /// Key-value config file; flags override it, it overrides AMBIMT_* variables.
    #[arg(long, global = true, env = "AMBIMT_CONFIG", value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output format for the summary printed on stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text, env = "AMBIMT_FORMAT")]
    format: Format,
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Validate an annotated corpus or evaluation set and report statistics.
    Ingest(IngestArgs),
    /// Build a sense index from an annotated corpus.
    Index(IndexArgs),
    /// Report how many sentences have k same-sense neighbours.
    Coverage(CoverageArgs),
    /// Select k-shot demonstrations for each query sentence.
    Retrieve(RetrieveArgs),
    /// Render one prompt per query.
    Prompt(PromptArgs),
    /// Complete prompts through an HTTP endpoint or the mock model.
    Translate(TranslateArgs),
    /// Score hypotheses against an evaluation set.
    Evaluate(EvaluateArgs),
    /// Correlate accuracy with MT metric columns.
    Correlate(CorrelateArgs),
    /// Select an ambiguity-ranked fine-tuning corpus and write Alpaca records.
    Curate(CurateArgs),
    /// Generate a synthetic corpus, evaluation set and mock lexicon.
    Synth(SynthArgs),
    /// Serve the mock model over HTTP until interrupted.
    MockServer(MockServerArgs),
}

#[derive(Args, Serialize)]
pub struct IngestArgs {
    /// Annotated corpus (or evaluation set with --eval), one JSON record per line.
    #[arg(long, env = "AMBIMT_CORPUS")]
    pub corpus: PathBuf,
    /// Treat the input as an evaluation set.
    #[arg(long)]
    pub eval: bool,
    /// Write the accepted records, normalized, to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run manifest path (default: next to the output).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Serialize)]
pub struct IndexArgs {
    /// Annotated corpus.
    #[arg(long, env = "AMBIMT_CORPUS")]
    pub corpus: PathBuf,
    /// Index file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Corpus identifier stored in the index (default: corpus file stem).
    #[arg(long)]
    pub corpus_id: Option<String>,
    /// `lemma<TAB>degree` table replacing observed polysemy degrees.
    #[arg(long)]
    pub degree_overrides: Option<PathBuf>,
    /// Run manifest path (default: next to the output).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Serialize)]
pub struct CoverageArgs {
    /// Annotated corpus.
    #[arg(long, env = "AMBIMT_CORPUS")]
    pub corpus: PathBuf,
    /// Sense index built from the corpus.
    #[arg(long, env = "AMBIMT_INDEX")]
    pub index: PathBuf,
    /// Number of same-sense neighbours required.
    #[arg(long, default_value_t = 5, env = "AMBIMT_K")]
    pub k: usize,
    /// Write the report (JSON) to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run manifest path (default: next to the output).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Demonstrations sharing the query's most polysemous word sense.
    Similar,
    /// Uniformly random demonstrations.
    Random,
}

#[derive(Args, Serialize)]
pub struct RetrieveArgs {
    /// Annotated corpus to draw demonstrations from.
    #[arg(long, env = "AMBIMT_CORPUS")]
    pub corpus: PathBuf,
    /// Sense index of the corpus (required for the similar strategy).
    #[arg(long, env = "AMBIMT_INDEX")]
    pub index: Option<PathBuf>,
    /// Query sentences: an evaluation set or an annotated corpus.
    #[arg(long)]
    pub queries: PathBuf,
    /// Demonstrations per query.
    #[arg(long, default_value_t = 3, env = "AMBIMT_K")]
    pub k: usize,
    /// Run seed; each query derives its own seed from this and its id.
    #[arg(long, env = "AMBIMT_SEED")]
    pub seed: u64,
    /// Demonstration strategy.
    #[arg(long, value_enum, default_value_t = Strategy::Similar)]
    pub strategy: Strategy,
    /// What to do when fewer than k same-sense pairs exist: matched-only or pad-random.
    #[arg(long, default_value_t = FallbackPolicy::MatchedOnly)]
    pub policy: FallbackPolicy,
    /// Demonstrations file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Run manifest path (default: next to the output).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Serialize)]
pub struct PromptArgs {
    /// Query sentences: an evaluation set or an annotated corpus.
    #[arg(long)]
    pub queries: PathBuf,
    /// Demonstrations file from `retrieve`; omit for zero-shot prompts.
    #[arg(long)]
    pub demos: Option<PathBuf>,
    /// completion, question, alpaca, or a template file.
    #[arg(long, default_value = "completion", env = "AMBIMT_TEMPLATE")]
    pub template: String,
    /// Source language code (default: from the demonstrations).
    #[arg(long, env = "AMBIMT_SRC_LANG")]
    pub src_lang: Option<String>,
    /// Target language code (default: from the demonstrations).
    #[arg(long, env = "AMBIMT_TGT_LANG")]
    pub tgt_lang: Option<String>,
    /// Prompts file to write: one {"id", "prompt"} object per line.
    #[arg(long)]
    pub out: PathBuf,
    /// Run manifest path (default: next to the output).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Serialize)]
pub struct TranslateArgs {
    /// Prompts file from `prompt`.
    #[arg(long)]
    pub prompts: PathBuf,
    /// Hypotheses file to write: one {"id", "translation"} object per line.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write full completion records (raw text, latency, errors) here.
    #[arg(long)]
    pub records: Option<PathBuf>,
    /// Base URL of the text-generation endpoint.
    #[arg(
        long,
        env = "AMBIMT_ENDPOINT",
        required_unless_present = "mock_lexicon",
        conflicts_with = "mock_lexicon"
    )]
    pub endpoint: Option<String>,
    /// Request path appended to the endpoint URL.
    #[arg(long, default_value = "/generate", env = "AMBIMT_ENDPOINT_PATH")]
    pub path: String,
    /// Wire schema: native, tgi or openai.
    #[arg(long, default_value = "native", env = "AMBIMT_SCHEMA")]
    pub schema: WireSchema,
    /// Model identifier; part of the cache key.
    #[arg(long, default_value = "default", env = "AMBIMT_MODEL")]
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    #[arg(long, env = "AMBIMT_TOKEN_ENV")]
    pub token_env: Option<String>,
    /// Per-request timeout in seconds.
    #[arg(long, default_value_t = 60.0)]
    pub timeout_secs: f64,
    /// Maximum concurrent requests.
    #[arg(long, default_value_t = 4, env = "AMBIMT_MAX_IN_FLIGHT")]
    pub max_in_flight: usize,
    /// Retries per prompt after a transient failure.
    #[arg(long, default_value_t = 3)]
    pub retries: u32,
    /// Delay before the first retry in milliseconds; doubles per retry.
    #[arg(long, default_value_t = 500)]
    pub backoff_ms: u64,
    /// Use the in-process mock model with this lexicon instead of an endpoint.
    #[arg(long)]
    pub mock_lexicon: Option<PathBuf>,
    /// Mock behavior: copy-from-demo or most-frequent-sense.
    #[arg(long, default_value = "copy-from-demo")]
    pub mock_behavior: MockBehavior,
    /// Append-only completion cache file.
    #[arg(long, env = "AMBIMT_CACHE")]
    pub cache: Option<PathBuf>,
    /// Beam size sent to the endpoint.
    #[arg(long, default_value_t = GenerationParams::default().beam_size)]
    pub beam_size: u32,
    /// Sampling temperature sent to the endpoint.
    #[arg(long, default_value_t = GenerationParams::default().temperature)]
    pub temperature: f64,
    /// Forbid repeating n-grams of this size.
    #[arg(long, default_value_t = GenerationParams::default().no_repeat_ngram)]
    pub no_repeat_ngram: u32,
    /// Maximum new tokens per completion.
    #[arg(long, default_value_t = GenerationParams::default().max_new_tokens)]
    pub max_new_tokens: u32,
    /// Run manifest path (default: next to the output).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Serialize)]
pub struct EvaluateArgs {
    /// Evaluation set with good and bad lexicalizations.
    #[arg(long, env = "AMBIMT_EVAL_SET")]
    pub eval_set: PathBuf,
    /// Hypotheses file from `translate`.
    #[arg(long)]
    pub hypotheses: PathBuf,
    /// exclude (accuracy over decided items) or count-as-error.
    #[arg(long, default_value = "exclude", env = "AMBIMT_MISS_POLICY")]
    pub miss_policy: MissPolicy,
    /// auto (substring for unsegmented scripts, whole words otherwise), token or substring.
    #[arg(long, default_value = "auto")]
    pub match_mode: MatchMode,
    /// Write the full report (JSON) to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run manifest path (default: next to the output).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Serialize)]
pub struct CorrelateArgs {
    /// Tab- or comma-separated table: system, accuracy, metric columns.
    #[arg(long)]
    pub table: PathBuf,
    /// Write the correlations (JSON) to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run manifest path (default: next to the output).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Serialize)]
pub struct CurateArgs {
    /// Annotated corpus.
    #[arg(long, env = "AMBIMT_CORPUS")]
    pub corpus: PathBuf,
    /// Sense index of the corpus.
    #[arg(long, env = "AMBIMT_INDEX")]
    pub index: PathBuf,
    /// Number of sentences to select.
    #[arg(long)]
    pub size: usize,
    /// Selected sentences held out for validation.
    #[arg(long, default_value_t = ambimt_core::curation::DEFAULT_HOLDOUT)]
    pub holdout: usize,
    /// Seed for the validation split.
    #[arg(long, env = "AMBIMT_SEED")]
    pub seed: u64,
    /// Directory for train.jsonl, valid.jsonl and manifest.json.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Run manifest path (default: next to the training file).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Serialize)]
pub struct SynthArgs {
    /// Directory for corpus.jsonl, eval.jsonl and lexicon.json.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Generator seed.
    #[arg(long, env = "AMBIMT_SEED")]
    pub seed: u64,
    /// Corpus sentences.
    #[arg(long, default_value_t = 500)]
    pub sentences: usize,
    /// Ambiguous lemmas (at most 12).
    #[arg(long, default_value_t = 10)]
    pub lemmas: usize,
    /// Evaluation items.
    #[arg(long, default_value_t = 40)]
    pub eval_items: usize,
    /// Run manifest path (default: next to the corpus).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Serialize)]
pub struct MockServerArgs {
    /// Mock lexicon (JSON).
    #[arg(long)]
    pub lexicon: PathBuf,
    /// copy-from-demo or most-frequent-sense.
    #[arg(long, default_value = "copy-from-demo")]
    pub behavior: MockBehavior,
    /// Address to bind.
    #[arg(long, default_value = "127.0.0.1:8089")]
    pub addr: String,
}

fn main() -> ExitCode {
    let argv = match config::apply_config(std::env::args_os().collect(), &Cli::command()) {
        Ok(argv) => argv,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(argv);
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Ingest(a) => commands::data::ingest(a),
        Command::Index(a) => commands::data::index(a),
        Command::Coverage(a) => commands::data::coverage(a),
        Command::Synth(a) => commands::data::synth(a),
        Command::Retrieve(a) => commands::retrieve::retrieve(a),
        Command::Prompt(a) => commands::retrieve::prompt(a),
        Command::Translate(a) => commands::translate::translate(a),
        Command::MockServer(a) => commands::translate::mock_server(a),
        Command::Evaluate(a) => commands::evaluate::evaluate(a),
        Command::Correlate(a) => commands::evaluate::correlate(a),
        Command::Curate(a) => commands::curate::curate(a),
    };
    match result {
        Ok(outcome) => {
            outcome.print(cli.format);
            ExitCode::from(outcome.exit)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
