//! Deterministic stand-in for a translation model, usable in-process or behind
//! a local HTTP server.
//!
//! Lexicon file (JSON), keyed by lowercase source word:
//!
//! ```json
//! {"bank": {"mfs": "banco", "senses": {"bank%finance": "banco", "bank%river": "orilla"}},
//!  "the":  {"mfs": "el", "senses": {}}}
//! ```
//!
//! A word is ambiguous when it has more than one sense form.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{BackendError, CompletionBackend};
use crate::prompt::{GenerationParams, PromptTemplate, TemplateKind};

/// Text the mock appends after its translation line.
pub const MOCK_FILLER: &str = "<end of translation>";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconEntry {
    /// Form used when no demonstration decides.
    pub mfs: String,
    #[serde(default)]
    pub senses: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MockLexicon {
    pub entries: BTreeMap<String, LexiconEntry>,
}

impl MockLexicon {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let mut lexicon: MockLexicon = serde_json::from_str(text)?;
        lexicon.entries = std::mem::take(&mut lexicon.entries)
            .into_iter()
            .map(|(k, v)| (k.to_lowercase(), v))
            .collect();
        Ok(lexicon)
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("lexicon serializes")
    }

    pub fn get(&self, word: &str) -> Option<&LexiconEntry> {
        self.entries.get(&word.to_lowercase())
    }

    pub fn is_ambiguous(&self, word: &str) -> bool {
        self.get(word).is_some_and(|e| e.senses.len() > 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MockBehavior {
    /// Ambiguous words take the form seen in the earliest demonstration that
    /// contains them.
    #[default]
    CopyFromDemo,
    /// Ambiguous words always take the most-frequent-sense form.
    MostFrequentSense,
}

impl FromStr for MockBehavior {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "copy-from-demo" => Ok(MockBehavior::CopyFromDemo),
            "most-frequent-sense" | "mfs" => Ok(MockBehavior::MostFrequentSense),
            other => Err(format!("unknown mock behavior {other:?}")),
        }
    }
}

impl fmt::Display for MockBehavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MockBehavior::CopyFromDemo => "copy-from-demo",
            MockBehavior::MostFrequentSense => "most-frequent-sense",
        })
    }
}

/// Splits a token into leading punctuation, word, trailing punctuation.
fn split_punct(token: &str) -> (&str, &str, &str) {
    let start = token
        .find(|c: char| c.is_alphanumeric())
        .unwrap_or(token.len());
    let end = token
        .rfind(|c: char| c.is_alphanumeric())
        .map(|i| i + token[i..].chars().next().map_or(1, char::len_utf8))
        .unwrap_or(start)
        .max(start);
    (&token[..start], &token[start..end], &token[end..])
}

fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split_whitespace()
        .map(|t| split_punct(t).1.to_lowercase())
        .filter(|w| !w.is_empty())
}

fn parse_any(prompt: &str) -> Option<(Vec<(String, String)>, String)> {
    [
        TemplateKind::Completion,
        TemplateKind::Question,
        TemplateKind::Alpaca,
    ]
    .into_iter()
    .find_map(|kind| PromptTemplate::builtin(kind).parse_prompt(prompt, None))
    .map(|p| (p.demos, p.source))
}

/// Form of `word` shown by the earliest demonstration whose source contains
/// the word and whose target contains one of its sense forms.
fn copied_form(word: &str, entry: &LexiconEntry, demos: &[(String, String)]) -> Option<String> {
    let forms: Vec<String> = entry.senses.values().map(|f| f.to_lowercase()).collect();
    demos.iter().find_map(|(src, tgt)| {
        if !words(src).any(|w| w == word) {
            return None;
        }
        words(tgt).find(|w| forms.contains(w))
    })
}

/// Translates the test sentence of a rendered prompt word by word.
///
/// Unknown words are copied verbatim. Punctuation around a word is kept.
/// Output is the translation, a newline, then [`MOCK_FILLER`]. A prompt that
/// no built-in template produced is translated as a whole.
pub fn mock_translate(prompt: &str, lexicon: &MockLexicon, behavior: MockBehavior) -> String {
    let (demos, source) = parse_any(prompt).unwrap_or_else(|| (Vec::new(), prompt.to_string()));
    let out: Vec<String> = source
        .split_whitespace()
        .map(|token| {
            let (pre, word, post) = split_punct(token);
            let lower = word.to_lowercase();
            let Some(entry) = lexicon.get(&lower) else {
                return token.to_string();
            };
            let form = if entry.senses.len() > 1 && behavior == MockBehavior::CopyFromDemo {
                copied_form(&lower, entry, &demos).unwrap_or_else(|| entry.mfs.clone())
            } else {
                entry.mfs.clone()
            };
            format!("{pre}{form}{post}")
        })
        .collect();
    format!("{}\n{MOCK_FILLER}", out.join(" "))
}

pub struct MockBackend {
    pub lexicon: MockLexicon,
    pub behavior: MockBehavior,
    model: String,
}

impl MockBackend {
    pub fn new(lexicon: MockLexicon, behavior: MockBehavior) -> Self {
        MockBackend {
            model: format!("mock-{behavior}"),
            lexicon,
            behavior,
        }
    }
}

impl CompletionBackend for MockBackend {
    fn model_id(&self) -> &str {
        &self.model
    }

    fn complete(&self, prompt: &str, _: &GenerationParams) -> Result<String, BackendError> {
        Ok(mock_translate(prompt, &self.lexicon, self.behavior))
    }
}

/// What the mock server answers.
#[derive(Debug, Clone)]
pub enum MockReply {
    /// The same completion for every prompt.
    Fixed(String),
    Translate(MockLexicon, MockBehavior),
    /// An error status with an empty JSON body.
    Status(u16),
    /// Fail with 503 for the first `n` requests, then reply with the fixed text.
    FlakyThen(usize, String),
}

/// Local HTTP endpoint speaking all supported wire schemas: the request prompt
/// is read from `prompt` or `inputs`, and the response carries the completion
/// under `text`, `generated_text` and `choices[0].text`.
pub struct MockServer {
    url: String,
    requests: Arc<AtomicUsize>,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl MockServer {
    /// Binds `addr` (e.g. `127.0.0.1:0`) and serves on a background thread.
    pub fn start(addr: &str, reply: MockReply) -> std::io::Result<MockServer> {
        let server = tiny_http::Server::http(addr).map_err(std::io::Error::other)?;
        let port = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| std::io::Error::other("mock server is not bound to an IP address"))?;
        let url = format!("http://{port}");
        let requests = Arc::new(AtomicUsize::new(0));
        let stop = Arc::new(AtomicBool::new(false));
        let handle = {
            let requests = Arc::clone(&requests);
            let stop = Arc::clone(&stop);
            std::thread::spawn(move || {
                while !stop.load(Ordering::SeqCst) {
                    match server.recv_timeout(Duration::from_millis(20)) {
                        Ok(Some(request)) => {
                            let n = requests.fetch_add(1, Ordering::SeqCst);
                            handle_request(request, &reply, n);
                        }
                        Ok(None) => {}
                        Err(_) => return,
                    }
                }
            })
        };
        Ok(MockServer {
            url,
            requests,
            stop,
            handle: Some(handle),
        })
    }

    /// Base URL, e.g. `http://127.0.0.1:41234`.
    pub fn url(&self) -> &str {
        &self.url
    }

    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    /// Serves until the process exits.
    pub fn wait(mut self) {
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn handle_request(mut request: tiny_http::Request, reply: &MockReply, n: usize) {
    let mut body = String::new();
    let prompt = match request.as_reader().read_to_string(&mut body) {
        Ok(_) => serde_json::from_str::<Value>(&body).ok().and_then(|v| {
            v.get("prompt")
                .or_else(|| v.get("inputs"))
                .and_then(Value::as_str)
                .map(str::to_string)
        }),
        Err(_) => None,
    };
    let (status, completion) = match (reply, prompt) {
        (_, None) => (400, None),
        (MockReply::Status(code), _) => (*code, None),
        (MockReply::Fixed(text), _) => (200, Some(text.clone())),
        (MockReply::FlakyThen(fails, _), _) if n < *fails => (503, None),
        (MockReply::FlakyThen(_, text), _) => (200, Some(text.clone())),
        (MockReply::Translate(lexicon, behavior), Some(p)) => {
            (200, Some(mock_translate(&p, lexicon, *behavior)))
        }
    };
    let body = match completion {
        Some(text) => json!({"text": text, "generated_text": text, "choices": [{"text": text}]}),
        None => json!({}),
    };
    let header =
        tiny_http::Header::from_bytes("Content-Type", "application/json").expect("static header");
    let response = tiny_http::Response::from_string(body.to_string())
        .with_status_code(status)
        .with_header(header);
    let _ = request.respond(response);
}
