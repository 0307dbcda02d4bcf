//! File-format conformance on the committed fixtures.

use std::collections::BTreeMap;
use std::io::Cursor;

use ambimt_core::corpus::{
    parse_annotated_corpus, parse_eval_set, validate_corpus, write_corpus, write_eval_set,
};
use ambimt_core::eval::stats::pearson;
use ambimt_core::index::{build_index, IndexError, SenseIndex};
use ambimt_core::SenseId;

const C0: &str = include_str!("fixtures/c0.jsonl");
const C0_EVAL: &str = include_str!("fixtures/c0_eval.jsonl");
const C0_MALFORMED: &str = include_str!("fixtures/c0_malformed.jsonl");
const C0_INDEX: &[u8] = include_bytes!("fixtures/c0.index");
const PEARSON_20: &str = include_str!("fixtures/pearson_20.tsv");

fn sid(s: &str) -> SenseId {
    SenseId::new(s).unwrap()
}

#[test]
fn c0_corpus_parses_and_reserializes_byte_identically() {
    let (pairs, diags) = parse_annotated_corpus(Cursor::new(C0)).unwrap();
    assert!(diags.is_empty(), "{diags:?}");
    assert_eq!(pairs.len(), 4);
    assert_eq!(write_corpus(&pairs), C0);

    let report = validate_corpus(&pairs);
    assert_eq!(report.sentences, 4);
    assert_eq!(report.sense_tokens, 4);
    assert_eq!(report.distinct_sense_lemmas, 2);
    assert_eq!(report.distinct_senses, 3);
}

#[test]
fn c0_eval_set_round_trips() {
    let (items, diags) = parse_eval_set(Cursor::new(C0_EVAL)).unwrap();
    assert!(diags.is_empty(), "{diags:?}");
    assert_eq!(items.len(), 3);
    assert_eq!(items[0].ambiguous_token().sense, Some(sid("R")));
    assert_eq!(write_eval_set(&items), C0_EVAL);
}

#[test]
fn malformed_lines_are_diagnosed_not_fatal() {
    let (pairs, diags) = parse_annotated_corpus(Cursor::new(C0_MALFORMED)).unwrap();
    let ids: Vec<&str> = pairs.iter().map(|p| p.id()).collect();
    assert_eq!(ids, vec!["s1", "s5"]);
    // lemma lowercased on ingest
    assert_eq!(pairs[1].source.tokens[0].lemma, "bank");
    let lines: Vec<usize> = diags.iter().map(|d| d.line).collect();
    assert_eq!(lines, vec![2, 3, 4, 5, 6, 7]);
    assert!(diags[5].message.contains("duplicate id"));
}

#[test]
fn invalid_utf8_line_is_a_diagnostic() {
    let mut bytes = C0.lines().next().unwrap().as_bytes().to_vec();
    bytes.extend_from_slice(b"\n\xff\xfe broken\n");
    let (pairs, diags) = parse_annotated_corpus(Cursor::new(bytes)).unwrap();
    assert_eq!(pairs.len(), 1);
    assert_eq!(diags.len(), 1);
    assert_eq!(diags[0].line, 2);
}

#[test]
fn c0_index_matches_committed_bytes() {
    let (pairs, _) = parse_annotated_corpus(Cursor::new(C0)).unwrap();
    let index = build_index("c0", &pairs);
    assert_eq!(
        String::from_utf8(index.to_bytes()).unwrap(),
        String::from_utf8(C0_INDEX.to_vec()).unwrap()
    );
    let loaded = SenseIndex::from_bytes(C0_INDEX).unwrap();
    assert_eq!(loaded, index);
    assert_eq!(loaded.polysemy_degree("bank"), 2);
    assert_eq!(loaded.sense_frequency(&sid("R")), 2);
}

#[test]
fn c0_index_rejects_tampering() {
    let text = String::from_utf8(C0_INDEX.to_vec()).unwrap();
    let tampered = text.replace("\"R\":2", "\"R\":3");
    assert_ne!(tampered, text);
    assert!(matches!(
        SenseIndex::from_bytes(tampered.as_bytes()),
        Err(IndexError::Corrupt(_))
    ));
    let future = text.replacen(" 1\n", " 2\n", 1);
    assert!(matches!(
        SenseIndex::from_bytes(future.as_bytes()),
        Err(IndexError::UnsupportedVersion {
            found: 2,
            supported: 1
        })
    ));
    assert!(matches!(
        SenseIndex::from_bytes(&C0_INDEX[..C0_INDEX.len() - 10]),
        Err(IndexError::Truncated) | Err(IndexError::Corrupt(_))
    ));
}

#[test]
fn c0_index_with_overrides() {
    let (pairs, _) = parse_annotated_corpus(Cursor::new(C0)).unwrap();
    let index =
        build_index("c0", &pairs).with_degree_overrides(BTreeMap::from([("bass".to_string(), 5)]));
    assert_eq!(index.polysemy_degree("bass"), 5);
    assert_eq!(index.observed_degree("bass"), 1);
    assert_eq!(SenseIndex::from_bytes(&index.to_bytes()).unwrap(), index);
}

#[test]
fn pearson_matches_high_precision_reference() {
    // reference: tests/oracles/pearson_oracle.py at 50 digits
    let rows: Vec<(f64, f64)> = PEARSON_20
        .lines()
        .skip(1)
        .map(|l| {
            let (x, y) = l.split_once('\t').unwrap();
            (x.parse().unwrap(), y.parse().unwrap())
        })
        .collect();
    let (x, y): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
    let r = pearson(&x, &y).unwrap();
    assert_eq!(r.n, 20);
    assert!(
        (r.rho - -0.281_773_248_952_333_254_29).abs() < 1e-9,
        "rho {}",
        r.rho
    );
    assert!(
        (r.p_value - 0.228_757_486_316_788_850_47).abs() < 1e-9,
        "p {}",
        r.p_value
    );
}
