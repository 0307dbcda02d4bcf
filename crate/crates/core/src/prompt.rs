//! k-shot prompt rendering, completion parsing and Alpaca records.
//!
//! A template is a small sectioned text file:
//!
//! ```text
//! [header]      optional, rendered once before everything else
//! [demo]        one block per demonstration; omitted for zero-shot-only templates
//! [query]       the final block holding the test sentence
//! [separator]   optional, defaults to a blank line ("\n\n"); `\n` escapes allowed
//! ```
//!
//! Section bodies may use the placeholders `{src_lang}`, `{tgt_lang}`,
//! `{source}` and `{target}` (`{target}` only in `[demo]`). `{{` and `}}`
//! produce literal braces. Trailing blank lines of a section are dropped.

use std::fmt;
use std::str::FromStr;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ParallelPair;

const COMPLETION_TEMPLATE: &str = include_str!("../templates/completion.tmpl");
const QUESTION_TEMPLATE: &str = include_str!("../templates/question.tmpl");
const ALPACA_TEMPLATE: &str = include_str!("../templates/alpaca.tmpl");

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("template error: {0}")]
    Template(String),
    #[error("this template only supports zero-shot prompts, got {0} demonstrations")]
    ZeroShotOnly(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemplateKind {
    /// Text completion, for foundation models.
    Completion,
    /// Final block phrased as a question, for instruction-tuned models.
    Question,
    /// Alpaca instruction/input/response layout; zero-shot only.
    Alpaca,
}

impl FromStr for TemplateKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "completion" => Ok(TemplateKind::Completion),
            "question" => Ok(TemplateKind::Question),
            "alpaca" => Ok(TemplateKind::Alpaca),
            other => Err(format!(
                "unknown template {other:?} (expected completion, question or alpaca)"
            )),
        }
    }
}

impl fmt::Display for TemplateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TemplateKind::Completion => "completion",
            TemplateKind::Question => "question",
            TemplateKind::Alpaca => "alpaca",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    SrcLang,
    TgtLang,
    Source,
    Target,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Literal(String),
    Slot(Field),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    header: Option<Vec<Segment>>,
    demo: Option<Vec<Segment>>,
    query: Vec<Segment>,
    separator: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub demos: Vec<(String, String)>,
    pub test_source: String,
    /// Display names, e.g. "English".
    pub src_lang: String,
    pub tgt_lang: String,
    pub template: TemplateKind,
}

impl PromptSpec {
    pub fn k(&self) -> usize {
        self.demos.len()
    }
}

/// Demonstrations and test sentence recovered from a rendered prompt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedPrompt {
    pub demos: Vec<(String, String)>,
    pub source: String,
}

fn parse_segments(
    body: &str,
    section: &str,
    allowed: &[Field],
) -> Result<Vec<Segment>, PromptError> {
    let mut segments = Vec::new();
    let mut literal = String::new();
    let mut chars = body.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '{' if chars.peek() == Some(&'{') => {
                chars.next();
                literal.push('{');
            }
            '}' if chars.peek() == Some(&'}') => {
                chars.next();
                literal.push('}');
            }
            '{' => {
                let name: String = chars.by_ref().take_while(|&c| c != '}').collect();
                let field = match name.as_str() {
                    "src_lang" => Field::SrcLang,
                    "tgt_lang" => Field::TgtLang,
                    "source" => Field::Source,
                    "target" => Field::Target,
                    _ => {
                        return Err(PromptError::Template(format!(
                            "unknown placeholder {{{name}}} in [{section}]"
                        )))
                    }
                };
                if !allowed.contains(&field) {
                    return Err(PromptError::Template(format!(
                        "placeholder {{{name}}} is not allowed in [{section}]"
                    )));
                }
                if !literal.is_empty() {
                    segments.push(Segment::Literal(std::mem::take(&mut literal)));
                }
                segments.push(Segment::Slot(field));
            }
            '}' => {
                return Err(PromptError::Template(format!(
                    "unmatched '}}' in [{section}]"
                )))
            }
            c => literal.push(c),
        }
    }
    if !literal.is_empty() {
        segments.push(Segment::Literal(literal));
    }
    Ok(segments)
}

struct Values<'a> {
    src_lang: &'a str,
    tgt_lang: &'a str,
    source: &'a str,
    target: &'a str,
}

fn render_segments(out: &mut String, segments: &[Segment], v: &Values<'_>) {
    for seg in segments {
        match seg {
            Segment::Literal(s) => out.push_str(s),
            Segment::Slot(Field::SrcLang) => out.push_str(v.src_lang),
            Segment::Slot(Field::TgtLang) => out.push_str(v.tgt_lang),
            Segment::Slot(Field::Source) => out.push_str(v.source),
            Segment::Slot(Field::Target) => out.push_str(v.target),
        }
    }
}

/// Regex source for a section; source/target slots become lazy capture groups.
/// Language slots match the given names, or any single-line text when `langs`
/// is `None`.
fn segments_regex(
    segments: &[Segment],
    langs: Option<(&str, &str)>,
    slots: &mut Vec<Field>,
) -> String {
    let lang = |name: Option<&str>| name.map_or_else(|| "[^\n]*?".to_string(), regex::escape);
    let mut re = String::new();
    for seg in segments {
        match seg {
            Segment::Literal(s) => re.push_str(&regex::escape(s)),
            Segment::Slot(Field::SrcLang) => re.push_str(&lang(langs.map(|l| l.0))),
            Segment::Slot(Field::TgtLang) => re.push_str(&lang(langs.map(|l| l.1))),
            Segment::Slot(f) => {
                slots.push(*f);
                re.push_str("((?s:.*?))");
            }
        }
    }
    re
}

/// Captured (source, target) values; repeated slots must agree.
fn collect_slots(
    caps: &regex::Captures<'_>,
    slots: &[Field],
) -> Option<(Option<String>, Option<String>)> {
    let mut source: Option<String> = None;
    let mut target: Option<String> = None;
    for (i, field) in slots.iter().enumerate() {
        let value = caps.get(i + 1)?.as_str().to_string();
        let slot = if *field == Field::Source {
            &mut source
        } else {
            &mut target
        };
        match slot {
            Some(prev) if *prev != value => return None,
            _ => *slot = Some(value),
        }
    }
    Some((source, target))
}

impl PromptTemplate {
    pub fn builtin(kind: TemplateKind) -> PromptTemplate {
        let text = match kind {
            TemplateKind::Completion => COMPLETION_TEMPLATE,
            TemplateKind::Question => QUESTION_TEMPLATE,
            TemplateKind::Alpaca => ALPACA_TEMPLATE,
        };
        PromptTemplate::parse(text).expect("built-in templates are valid")
    }

    /// Source text of a built-in template, for users who want to copy and edit it.
    pub fn builtin_source(kind: TemplateKind) -> &'static str {
        match kind {
            TemplateKind::Completion => COMPLETION_TEMPLATE,
            TemplateKind::Question => QUESTION_TEMPLATE,
            TemplateKind::Alpaca => ALPACA_TEMPLATE,
        }
    }

    pub fn parse(text: &str) -> Result<PromptTemplate, PromptError> {
        let mut sections: Vec<(String, Vec<&str>)> = Vec::new();
        for line in text.lines() {
            let trimmed = line.trim_end();
            if trimmed.starts_with('[') && trimmed.ends_with(']') && !trimmed.contains(' ') {
                let name = trimmed[1..trimmed.len() - 1].to_string();
                if sections.iter().any(|(n, _)| *n == name) {
                    return Err(PromptError::Template(format!(
                        "section [{name}] given twice"
                    )));
                }
                sections.push((name, Vec::new()));
            } else if let Some((_, lines)) = sections.last_mut() {
                lines.push(line);
            } else if !line.trim().is_empty() {
                return Err(PromptError::Template(
                    "text before the first section header".into(),
                ));
            }
        }

        let mut header = None;
        let mut demo = None;
        let mut query = None;
        let mut separator = "\n\n".to_string();
        for (name, mut lines) in sections {
            while lines.last().is_some_and(|l| l.trim().is_empty()) {
                lines.pop();
            }
            let body = lines.join("\n");
            use Field::*;
            match name.as_str() {
                "header" => header = Some(parse_segments(&body, "header", &[SrcLang, TgtLang])?),
                "demo" => {
                    demo = Some(parse_segments(
                        &body,
                        "demo",
                        &[SrcLang, TgtLang, Source, Target],
                    )?)
                }
                "query" => {
                    query = Some(parse_segments(&body, "query", &[SrcLang, TgtLang, Source])?)
                }
                "separator" => separator = body.replace("\\n", "\n"),
                other => return Err(PromptError::Template(format!("unknown section [{other}]"))),
            }
        }
        let query = query.ok_or_else(|| PromptError::Template("missing [query] section".into()))?;
        if !query.contains(&Segment::Slot(Field::Source)) {
            return Err(PromptError::Template(
                "[query] must contain {source}".into(),
            ));
        }
        if let Some(demo) = &demo {
            if !demo.contains(&Segment::Slot(Field::Source))
                || !demo.contains(&Segment::Slot(Field::Target))
            {
                return Err(PromptError::Template(
                    "[demo] must contain {source} and {target}".into(),
                ));
            }
        }
        if separator.is_empty() {
            return Err(PromptError::Template("separator must not be empty".into()));
        }
        Ok(PromptTemplate {
            header,
            demo,
            query,
            separator,
        })
    }

    pub fn supports_demos(&self) -> bool {
        self.demo.is_some()
    }

    pub fn render(
        &self,
        demos: &[(String, String)],
        source: &str,
        src_lang: &str,
        tgt_lang: &str,
    ) -> Result<String, PromptError> {
        if !demos.is_empty() && self.demo.is_none() {
            return Err(PromptError::ZeroShotOnly(demos.len()));
        }
        let mut out = String::new();
        let blank = Values {
            src_lang,
            tgt_lang,
            source: "",
            target: "",
        };
        if let Some(header) = &self.header {
            render_segments(&mut out, header, &blank);
            out.push_str(&self.separator);
        }
        if let Some(demo) = &self.demo {
            for (x, y) in demos {
                render_segments(
                    &mut out,
                    demo,
                    &Values {
                        source: x,
                        target: y,
                        ..blank
                    },
                );
                out.push_str(&self.separator);
            }
        }
        render_segments(&mut out, &self.query, &Values { source, ..blank });
        Ok(out)
    }

    /// Inverse of [`PromptTemplate::render`]. With `langs` unset, any language
    /// names are accepted. Returns `None` if `prompt` was not produced by this
    /// template.
    pub fn parse_prompt(&self, prompt: &str, langs: Option<(&str, &str)>) -> Option<ParsedPrompt> {
        let sep = regex::escape(&self.separator);
        let mut rest = prompt;
        if let Some(header) = &self.header {
            let mut slots = Vec::new();
            let re = Regex::new(&format!(
                r"\A{}{sep}",
                segments_regex(header, langs, &mut slots)
            ))
            .ok()?;
            let m = re.find(rest)?;
            rest = &rest[m.end()..];
        }

        let mut query_slots = Vec::new();
        let query_re = Regex::new(&format!(
            r"\A{}\z",
            segments_regex(&self.query, langs, &mut query_slots)
        ))
        .ok()?;
        let demo_re = match &self.demo {
            Some(demo) => {
                let mut slots = Vec::new();
                let re = Regex::new(&format!(
                    r"\A{}{sep}",
                    segments_regex(demo, langs, &mut slots)
                ))
                .ok()?;
                Some((re, slots))
            }
            None => None,
        };

        let mut demos = Vec::new();
        loop {
            if let Some((re, slots)) = &demo_re {
                if let Some(caps) = re.captures(rest) {
                    if let Some((Some(x), Some(y))) = collect_slots(&caps, slots) {
                        demos.push((x, y));
                        rest = &rest[caps.get(0).expect("whole match").end()..];
                        continue;
                    }
                }
            }
            let caps = query_re.captures(rest)?;
            let (source, _) = collect_slots(&caps, &query_slots)?;
            return Some(ParsedPrompt {
                demos,
                source: source?,
            });
        }
    }
}

/// Renders `spec` with the built-in template of its kind.
pub fn render_prompt(spec: &PromptSpec) -> Result<String, PromptError> {
    PromptTemplate::builtin(spec.template).render(
        &spec.demos,
        &spec.test_source,
        &spec.src_lang,
        &spec.tgt_lang,
    )
}

/// Extracts the translation from a raw completion: everything before the first
/// newline, verbatim.
pub fn parse_completion(raw: &str) -> String {
    raw.split('\n').next().unwrap_or("").to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub beam_size: u32,
    pub temperature: f64,
    pub no_repeat_ngram: u32,
    pub max_new_tokens: u32,
}

impl Default for GenerationParams {
    /// Settings used when prompting: beam 1, temperature 1, no 4-gram repeats.
    fn default() -> Self {
        GenerationParams {
            beam_size: 1,
            temperature: 1.0,
            no_repeat_ngram: 4,
            max_new_tokens: 150,
        }
    }
}

impl GenerationParams {
    /// Decoding used for LoRA fine-tuned models: beam 3, at most 150 new tokens.
    pub fn finetuned() -> Self {
        GenerationParams {
            beam_size: 3,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.beam_size < 1 {
            return Err("beam size must be at least 1".into());
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err("temperature must be a non-negative number".into());
        }
        if self.max_new_tokens == 0 {
            return Err("max_new_tokens must be positive".into());
        }
        Ok(())
    }
}

/// English display name for a language code; unknown codes pass through.
pub fn language_name(code: &str) -> &str {
    match code.to_ascii_lowercase().as_str() {
        "en" | "eng" => "English",
        "es" | "spa" => "Spanish",
        "it" | "ita" => "Italian",
        "de" | "deu" | "ger" => "German",
        "ru" | "rus" => "Russian",
        "zh" | "zho" | "chi" => "Chinese",
        "fr" | "fra" | "fre" => "French",
        "pt" | "por" => "Portuguese",
        "nl" | "nld" => "Dutch",
        "ja" | "jpn" => "Japanese",
        _ => code,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlpacaRecord {
    pub instruction: String,
    pub input: String,
    pub output: String,
}

/// Alpaca-style instruction record: the instruction names both languages, the
/// input is the source sentence and the output its translation.
pub fn render_alpaca_record(pair: &ParallelPair) -> AlpacaRecord {
    AlpacaRecord {
        instruction: format!(
            "Translate the following sentence from {} to {}.",
            language_name(&pair.src_lang),
            language_name(&pair.tgt_lang)
        ),
        input: pair.source.text.clone(),
        output: pair.target.clone(),
    }
}
