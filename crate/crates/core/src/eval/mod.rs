//! Disambiguation accuracy over hypothesis translations.
//!
//! Each evaluation item lists good (correct-sense) and bad (wrong-sense)
//! target lexicalizations of its ambiguous word. A hypothesis is a **Hit** if a
//! good variant occurs in it, an **Error** if no good but some bad variant
//! occurs, and a **Miss** otherwise.

pub mod stats;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Diagnostic, EvalItem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VerdictKind {
    Hit,
    Error,
    Miss,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub kind: VerdictKind,
    /// The variant that decided the verdict (none for a Miss).
    pub matched: Option<String>,
}

/// How a lexicalization is located in a hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    /// Substring for variants written in unsegmented scripts (Chinese,
    /// Japanese, Thai...), whole-token otherwise.
    #[default]
    Auto,
    Token,
    Substring,
}

impl FromStr for MatchMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(MatchMode::Auto),
            "token" => Ok(MatchMode::Token),
            "substring" => Ok(MatchMode::Substring),
            other => Err(format!(
                "unknown match mode {other:?} (expected auto, token or substring)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissPolicy {
    /// accuracy = hits / (hits + errors)
    #[default]
    Exclude,
    /// accuracy = hits / items
    CountAsError,
}

impl FromStr for MissPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exclude" => Ok(MissPolicy::Exclude),
            "count-as-error" => Ok(MissPolicy::CountAsError),
            other => Err(format!(
                "unknown miss policy {other:?} (expected exclude or count-as-error)"
            )),
        }
    }
}

impl fmt::Display for MissPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MissPolicy::Exclude => "exclude",
            MissPolicy::CountAsError => "count-as-error",
        })
    }
}

fn is_unsegmented(c: char) -> bool {
    matches!(c as u32,
        0x3040..=0x30FF      // hiragana, katakana
        | 0x3400..=0x4DBF    // CJK extension A
        | 0x4E00..=0x9FFF    // CJK unified ideographs
        | 0xF900..=0xFAFF    // CJK compatibility ideographs
        | 0x20000..=0x2FA1F  // CJK extensions B+
        | 0x0E00..=0x0EFF    // Thai, Lao
        | 0x1000..=0x109F    // Myanmar
        | 0x1780..=0x17FF) // Khmer
}

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn occurs(variant: &str, hyp_lower: &str, hyp_words: &[String], mode: MatchMode) -> bool {
    let substring = match mode {
        MatchMode::Substring => true,
        MatchMode::Token => false,
        MatchMode::Auto => variant.chars().any(is_unsegmented),
    };
    if substring {
        let v = variant.to_lowercase();
        return !v.is_empty() && hyp_lower.contains(&v);
    }
    let v = words(variant);
    !v.is_empty() && hyp_words.windows(v.len()).any(|w| w == v.as_slice())
}

/// Judges one hypothesis. Good variants are checked before bad ones, in list
/// order, and matching is case-insensitive.
pub fn judge(hypothesis: &str, item: &EvalItem, mode: MatchMode) -> Verdict {
    let lower = hypothesis.to_lowercase();
    let hyp_words = words(hypothesis);
    if let Some(g) = item
        .good
        .iter()
        .find(|g| occurs(g, &lower, &hyp_words, mode))
    {
        return Verdict {
            kind: VerdictKind::Hit,
            matched: Some(g.clone()),
        };
    }
    if let Some(b) = item
        .bad
        .iter()
        .find(|b| occurs(b, &lower, &hyp_words, mode))
    {
        return Verdict {
            kind: VerdictKind::Error,
            matched: Some(b.clone()),
        };
    }
    Verdict {
        kind: VerdictKind::Miss,
        matched: None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub id: String,
    pub translation: String,
}

/// Reads a hypotheses file: one `{"id": ..., "translation": ...}` per line.
pub fn parse_hypotheses<R: BufRead>(
    reader: R,
) -> std::io::Result<(Vec<Hypothesis>, Vec<Diagnostic>)> {
    let mut hyps = Vec::new();
    let mut diagnostics = Vec::new();
    for (i, line) in reader.split(b'\n').enumerate() {
        let line = line?;
        let text = String::from_utf8_lossy(&line);
        let text = text.trim();
        if text.is_empty() {
            continue;
        }
        match serde_json::from_str::<Hypothesis>(text) {
            Ok(h) => hyps.push(h),
            Err(e) => diagnostics.push(Diagnostic {
                line: i + 1,
                message: format!("malformed hypothesis: {e}"),
            }),
        }
    }
    Ok((hyps, diagnostics))
}

pub fn write_hypotheses(hyps: &[Hypothesis]) -> String {
    let mut out = String::new();
    for h in hyps {
        out.push_str(&serde_json::to_string(h).expect("hypotheses serialize"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("duplicate hypothesis ids: {}", .0.join(", "))]
    DuplicateHypotheses(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItemVerdict {
    pub id: String,
    pub kind: VerdictKind,
    pub matched: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub verdicts: Vec<ItemVerdict>,
    pub hits: usize,
    pub errors: usize,
    pub misses: usize,
    pub miss_policy: MissPolicy,
    /// Accuracy under `miss_policy`.
    pub accuracy: f64,
    pub accuracy_exclude: f64,
    pub accuracy_count_as_error: f64,
    /// Set when the chosen policy's denominator is zero (accuracy reported as 0).
    pub empty_denominator: bool,
    pub diagnostics: Vec<String>,
}

impl EvalReport {
    pub fn total(&self) -> usize {
        self.hits + self.errors + self.misses
    }

    fn from_verdicts(
        verdicts: Vec<ItemVerdict>,
        policy: MissPolicy,
        diagnostics: Vec<String>,
    ) -> Self {
        let count = |k| verdicts.iter().filter(|v| v.kind == k).count();
        let (hits, errors, misses) = (
            count(VerdictKind::Hit),
            count(VerdictKind::Error),
            count(VerdictKind::Miss),
        );
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let accuracy_exclude = ratio(hits, hits + errors);
        let accuracy_count_as_error = ratio(hits, hits + errors + misses);
        let (accuracy, empty_denominator) = match policy {
            MissPolicy::Exclude => (accuracy_exclude, hits + errors == 0),
            MissPolicy::CountAsError => (accuracy_count_as_error, verdicts.is_empty()),
        };
        EvalReport {
            verdicts,
            hits,
            errors,
            misses,
            miss_policy: policy,
            accuracy,
            accuracy_exclude,
            accuracy_count_as_error,
            empty_denominator,
            diagnostics,
        }
    }

    /// Plain-text summary.
    pub fn render_text(&self) -> String {
        let mut out = format!(
            "items: {}\nhits: {}\nerrors: {}\nmisses: {}\naccuracy ({}): {:.4}\naccuracy (exclude): {:.4}\naccuracy (count-as-error): {:.4}\n",
            self.total(),
            self.hits,
            self.errors,
            self.misses,
            self.miss_policy,
            self.accuracy,
            self.accuracy_exclude,
            self.accuracy_count_as_error,
        );
        if self.empty_denominator {
            out.push_str("warning: empty denominator, accuracy reported as 0\n");
        }
        for d in &self.diagnostics {
            out.push_str(&format!("diagnostic: {d}\n"));
        }
        out
    }
}

/// Scores a run. Items without a hypothesis count as Misses and produce a
/// diagnostic, as do hypotheses for unknown ids.
pub fn evaluate_run(
    hypotheses: &[Hypothesis],
    items: &[EvalItem],
    policy: MissPolicy,
    mode: MatchMode,
) -> Result<EvalReport, EvalError> {
    let mut by_id: HashMap<&str, &str> = HashMap::with_capacity(hypotheses.len());
    let mut dups = BTreeSet::new();
    for h in hypotheses {
        if by_id.insert(&h.id, &h.translation).is_some() {
            dups.insert(h.id.clone());
        }
    }
    if !dups.is_empty() {
        return Err(EvalError::DuplicateHypotheses(dups.into_iter().collect()));
    }

    let mut diagnostics = Vec::new();
    let known: BTreeSet<&str> = items.iter().map(|i| i.id.as_str()).collect();
    let unknown: Vec<&str> = hypotheses
        .iter()
        .map(|h| h.id.as_str())
        .filter(|id| !known.contains(id))
        .collect();
    if !unknown.is_empty() {
        diagnostics.push(format!(
            "hypotheses for unknown item ids: {}",
            unknown.join(", ")
        ));
    }

    let mut missing = Vec::new();
    let verdicts = items
        .iter()
        .map(|item| {
            let verdict = match by_id.get(item.id.as_str()) {
                Some(hyp) => judge(hyp, item, mode),
                None => {
                    missing.push(item.id.as_str());
                    Verdict {
                        kind: VerdictKind::Miss,
                        matched: None,
                    }
                }
            };
            ItemVerdict {
                id: item.id.clone(),
                kind: verdict.kind,
                matched: verdict.matched,
            }
        })
        .collect();
    if !missing.is_empty() {
        diagnostics.push(format!(
            "no hypothesis for item ids: {}",
            missing.join(", ")
        ));
    }
    Ok(EvalReport::from_verdicts(verdicts, policy, diagnostics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_eval_line;

    fn blaze() -> EvalItem {
        parse_eval_line(r#"{"id":"blaze","text":"The horse had a blaze between its eyes.","tokens":[{"surface":"blaze","lemma":"blaze","sense":"bn:marking","start":16,"end":21}],"good":["白线"],"bad":["火焰"]}"#).unwrap()
    }

    fn item(id: &str, good: &[&str], bad: &[&str]) -> EvalItem {
        let mut it = blaze();
        it.id = id.into();
        it.good = good.iter().map(|s| s.to_string()).collect();
        it.bad = bad.iter().map(|s| s.to_string()).collect();
        it
    }

    #[test]
    fn blaze_hit_and_error() {
        let bloomz = judge("这匹马的眼睛之间有一道白线。", &blaze(), MatchMode::Auto);
        assert_eq!(bloomz.kind, VerdictKind::Hit);
        assert_eq!(bloomz.matched.as_deref(), Some("白线"));
        let deepl = judge("那匹马的两眼之间有一团火焰。", &blaze(), MatchMode::Auto);
        assert_eq!(deepl.kind, VerdictKind::Error);
        assert_eq!(deepl.matched.as_deref(), Some("火焰"));
        assert_eq!(
            judge("马的眼睛", &blaze(), MatchMode::Auto).kind,
            VerdictKind::Miss
        );
    }

    #[test]
    fn token_matching_is_whole_word_and_case_folded() {
        let it = item("r", &["orilla", "margen del río"], &["banco"]);
        assert_eq!(
            judge("Me senté en la Orilla.", &it, MatchMode::Auto).kind,
            VerdictKind::Hit
        );
        assert_eq!(
            judge("en el margen del río", &it, MatchMode::Auto).kind,
            VerdictKind::Hit
        );
        assert_eq!(
            judge("el bancocentral", &it, MatchMode::Auto).kind,
            VerdictKind::Miss
        );
        assert_eq!(
            judge("el bancocentral", &it, MatchMode::Substring).kind,
            VerdictKind::Error
        );
        assert_eq!(
            judge("BANCO", &it, MatchMode::Token).kind,
            VerdictKind::Error
        );
    }

    #[test]
    fn good_takes_precedence() {
        let it = item("x", &["orilla"], &["banco"]);
        assert_eq!(
            judge("banco y orilla", &it, MatchMode::Auto).kind,
            VerdictKind::Hit
        );
    }

    #[test]
    fn policies_on_mixed_run() {
        let items = vec![
            item("a", &["yes"], &["no"]),
            item("b", &["yes"], &["no"]),
            item("c", &["yes"], &["no"]),
            item("d", &["yes"], &["no"]),
        ];
        let hyps = vec![
            Hypothesis {
                id: "a".into(),
                translation: "yes".into(),
            },
            Hypothesis {
                id: "b".into(),
                translation: "yes".into(),
            },
            Hypothesis {
                id: "c".into(),
                translation: "no".into(),
            },
            Hypothesis {
                id: "d".into(),
                translation: "maybe".into(),
            },
        ];
        let ex = evaluate_run(&hyps, &items, MissPolicy::Exclude, MatchMode::Auto).unwrap();
        assert_eq!((ex.hits, ex.errors, ex.misses), (2, 1, 1));
        assert!((ex.accuracy - 2.0 / 3.0).abs() < 1e-15);
        let ce = evaluate_run(&hyps, &items, MissPolicy::CountAsError, MatchMode::Auto).unwrap();
        assert_eq!(ce.accuracy, 0.5);
        assert!(ce.diagnostics.is_empty());
    }

    #[test]
    fn all_hits_and_empty_runs() {
        let items = vec![item("a", &["yes"], &["no"])];
        let hyps = vec![Hypothesis {
            id: "a".into(),
            translation: "yes".into(),
        }];
        for p in [MissPolicy::Exclude, MissPolicy::CountAsError] {
            assert_eq!(
                evaluate_run(&hyps, &items, p, MatchMode::Auto)
                    .unwrap()
                    .accuracy,
                1.0
            );
            let empty = evaluate_run(&[], &[], p, MatchMode::Auto).unwrap();
            assert_eq!(empty.accuracy, 0.0);
            assert!(empty.empty_denominator);
        }
    }

    #[test]
    fn missing_unknown_and_duplicate_ids() {
        let items = vec![item("a", &["yes"], &["no"]), item("b", &["yes"], &["no"])];
        let hyps = vec![
            Hypothesis {
                id: "a".into(),
                translation: "yes".into(),
            },
            Hypothesis {
                id: "zz".into(),
                translation: "yes".into(),
            },
        ];
        let r = evaluate_run(&hyps, &items, MissPolicy::Exclude, MatchMode::Auto).unwrap();
        assert_eq!(r.misses, 1);
        assert!(r.diagnostics.iter().any(|d| d.contains("zz")));
        assert!(r.diagnostics.iter().any(|d| d.contains('b')));

        let dup = vec![hyps[0].clone(), hyps[0].clone()];
        assert_eq!(
            evaluate_run(&dup, &items, MissPolicy::Exclude, MatchMode::Auto),
            Err(EvalError::DuplicateHypotheses(vec!["a".into()]))
        );
    }

    #[test]
    fn hypotheses_file_round_trip() {
        let hyps = vec![Hypothesis {
            id: "a".into(),
            translation: "línea \"blanca\"".into(),
        }];
        let text = write_hypotheses(&hyps) + "garbage\n";
        let (parsed, diags) = parse_hypotheses(text.as_bytes()).unwrap();
        assert_eq!(parsed, hyps);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].line, 2);
    }
}
