//! The parser against the brute-force enumerator in `common`: on every
//! string the enumerator accepts, the parser must return the identical
//! derivation set; on enumerated rejects (short strings exhaustively,
//! longer ones by seeded sampling) it must return nothing more.

mod common;

use common::oracle_language;
use ftag_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

const PLAIN: &str = include_str!("../../../grammars/plain.ftag");
const EXTRAPOSITION: &str = include_str!("../../../grammars/extraposition.ftag");
const PPX: &str = include_str!("../../../grammars/ppx.ftag");
const IQ: &str = include_str!("../../../grammars/iq.ftag");

const BUDGET: usize = 5;
const MAX_LEN: usize = 6;

fn limits() -> ParseLimits {
    ParseLimits {
        max_trees: Some(BUDGET),
        max_results: None,
    }
}

fn parse_set(g: &Grammar, toks: &[String]) -> BTreeSet<Derivation> {
    parse(g, toks, &limits())
        .derivations
        .into_iter()
        .map(|(d, _)| d)
        .collect()
}

/// Compares parser and enumerator over one grammar: all enumerated strings,
/// all strings up to `exhaustive_len`, and seeded random longer strings.
/// `expect` guards against a silently empty enumeration.
fn check_grammar(src: &str, exhaustive_len: usize, expect: &[&str]) {
    let g = load_grammar(src).unwrap();
    let lang = oracle_language(&g, BUDGET, MAX_LEN);
    for text in expect {
        assert!(lang.contains_key(&tokenize(text)), "missing: {text}");
    }
    for (toks, want) in &lang {
        assert_eq!(&parse_set(&g, toks), want, "{}: {}", g.name, toks.join(" "));
    }

    let vocab: Vec<String> = g.vocabulary().into_iter().collect();
    let mut layer: Vec<Vec<String>> = vec![Vec::new()];
    for _ in 0..exhaustive_len {
        let mut next = Vec::new();
        for prefix in &layer {
            for word in &vocab {
                let mut toks = prefix.clone();
                toks.push(word.clone());
                next.push(toks);
            }
        }
        for toks in &next {
            let want = lang.get(toks).cloned().unwrap_or_default();
            assert_eq!(parse_set(&g, toks), want, "{}: {}", g.name, toks.join(" "));
        }
        layer = next;
    }

    if exhaustive_len >= MAX_LEN {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(20260814);
    for _ in 0..150 {
        let len = rng.gen_range(exhaustive_len + 1..=MAX_LEN);
        let toks: Vec<String> = (0..len)
            .map(|_| vocab[rng.gen_range(0..vocab.len())].clone())
            .collect();
        let want = lang.get(&toks).cloned().unwrap_or_default();
        assert_eq!(parse_set(&g, &toks), want, "{}: {}", g.name, toks.join(" "));
    }
}

#[test]
fn parser_matches_enumeration_for_the_plain_grammar() {
    check_grammar(PLAIN, 6, &["john walked", "john walked to philadelphia"]);
}

#[test]
fn parser_matches_enumeration_for_stranded_prepositions() {
    check_grammar(PPX, 2, &["where did mary walk to"]);
}

#[test]
fn parser_matches_enumeration_for_indirect_questions() {
    check_grammar(IQ, 2, &[]);
}

#[test]
fn parser_matches_enumeration_for_extraposition() {
    check_grammar(EXTRAPOSITION, 2, &["a man arrived", "a man arrived who knew mary"]);
}
