#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ambimt_core::llm::mock::{MockBehavior, MockLexicon, MockReply, MockServer};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Runs the binary in `dir` with a clean AMBIMT_* environment.
pub fn ambimt(dir: &Path, args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ambimt"));
    cmd.current_dir(dir).args(args);
    for (key, _) in std::env::vars() {
        if key.starts_with("AMBIMT_") {
            cmd.env_remove(key);
        }
    }
    cmd.output().expect("binary runs")
}

pub fn ok(dir: &Path, args: &[&str]) -> String {
    let out = ambimt(dir, args);
    assert!(
        out.status.success(),
        "ambimt {} failed ({}):\n{}",
        args.join(" "),
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("stdout is UTF-8")
}

/// Files compared byte for byte against `tests/golden`.
pub const GOLDEN_FILES: &[&str] = &[
    "corpus.index",
    "coverage.json",
    "demos_similar.jsonl",
    "prompts_similar.jsonl",
    "hyps_similar.jsonl",
    "report_similar.json",
    "demos_random.jsonl",
    "prompts_random.jsonl",
    "hyps_random.jsonl",
    "report_random.json",
    "correlations.json",
    "finetune/train.jsonl",
    "finetune/valid.jsonl",
    "finetune/manifest.json",
];

pub struct PipelineRun {
    pub dir: tempfile::TempDir,
    pub server_requests: usize,
    pub cached_rerun_requests: usize,
}

/// Runs the whole pipeline on the fixture corpus, translating through the mock
/// model served over HTTP. All paths are relative to a fresh directory.
pub fn run_pipeline() -> PipelineRun {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for f in ["corpus.jsonl", "eval.jsonl", "lexicon.json", "metrics.tsv"] {
        std::fs::copy(fixtures().join(f), d.join(f)).unwrap();
    }
    let lexicon = MockLexicon::load(&d.join("lexicon.json")).unwrap();
    let server = MockServer::start(
        "127.0.0.1:0",
        MockReply::Translate(lexicon, MockBehavior::CopyFromDemo),
    )
    .unwrap();
    let url = server.url().to_string();

    ok(d, &["ingest", "--corpus", "corpus.jsonl"]);
    ok(d, &["ingest", "--eval", "--corpus", "eval.jsonl"]);
    ok(
        d,
        &["index", "--corpus", "corpus.jsonl", "--out", "corpus.index"],
    );
    ok(
        d,
        &[
            "coverage",
            "--corpus",
            "corpus.jsonl",
            "--index",
            "corpus.index",
            "--k",
            "3",
            "--out",
            "coverage.json",
        ],
    );
    for strategy in ["similar", "random"] {
        let demos = format!("demos_{strategy}.jsonl");
        let prompts = format!("prompts_{strategy}.jsonl");
        let hyps = format!("hyps_{strategy}.jsonl");
        let report = format!("report_{strategy}.json");
        ok(
            d,
            &[
                "retrieve",
                "--corpus",
                "corpus.jsonl",
                "--index",
                "corpus.index",
                "--queries",
                "eval.jsonl",
                "--k",
                "3",
                "--seed",
                "5",
                "--strategy",
                strategy,
                "--out",
                &demos,
            ],
        );
        ok(
            d,
            &[
                "prompt",
                "--queries",
                "eval.jsonl",
                "--demos",
                &demos,
                "--out",
                &prompts,
            ],
        );
        ok(
            d,
            &[
                "translate",
                "--prompts",
                &prompts,
                "--endpoint",
                &url,
                "--model",
                "mock",
                "--cache",
                "cache.jsonl",
                "--backoff-ms",
                "10",
                "--out",
                &hyps,
            ],
        );
        ok(
            d,
            &[
                "evaluate",
                "--eval-set",
                "eval.jsonl",
                "--hypotheses",
                &hyps,
                "--out",
                &report,
            ],
        );
    }
    let server_requests = server.request_count();

    // identical rerun is served entirely from the cache
    ok(
        d,
        &[
            "translate",
            "--prompts",
            "prompts_similar.jsonl",
            "--endpoint",
            &url,
            "--model",
            "mock",
            "--cache",
            "cache.jsonl",
            "--out",
            "hyps_rerun.jsonl",
        ],
    );
    let cached_rerun_requests = server.request_count() - server_requests;
    assert_eq!(
        std::fs::read(d.join("hyps_rerun.jsonl")).unwrap(),
        std::fs::read(d.join("hyps_similar.jsonl")).unwrap()
    );

    ok(
        d,
        &[
            "correlate",
            "--table",
            "metrics.tsv",
            "--out",
            "correlations.json",
        ],
    );
    ok(
        d,
        &[
            "curate",
            "--corpus",
            "corpus.jsonl",
            "--index",
            "corpus.index",
            "--size",
            "30",
            "--holdout",
            "5",
            "--seed",
            "9",
            "--out-dir",
            "finetune",
        ],
    );
    PipelineRun {
        dir,
        server_requests,
        cached_rerun_requests,
    }
}

/// Names of golden files that differ from the run's outputs.
pub fn golden_mismatches(run_dir: &Path) -> Vec<String> {
    GOLDEN_FILES
        .iter()
        .filter(|f| {
            let actual = std::fs::read(run_dir.join(f)).ok();
            let expected = std::fs::read(golden_dir().join(f)).ok();
            actual.is_none() || actual != expected
        })
        .map(|f| f.to_string())
        .collect()
}

pub fn bless(run_dir: &Path) {
    for f in GOLDEN_FILES {
        let dest = golden_dir().join(f);
        std::fs::create_dir_all(dest.parent().unwrap()).unwrap();
        std::fs::copy(run_dir.join(f), dest).unwrap();
    }
}
