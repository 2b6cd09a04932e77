//! Engine benchmarks: a unification microbenchmark, a full parse of the
//! six-token extraposition sentence, and bounded language enumeration in
//! both formalisms.

use criterion::{criterion_group, criterion_main, Criterion};
use ftag_core::*;
use std::hint::black_box;

const EXTRAPOSITION: &str = include_str!("../../../grammars/extraposition.ftag");
const PPX: &str = include_str!("../../../grammars/ppx.ftag");
const PPX_MC: &str = include_str!("../../../grammars/ppx.mctag");

fn bench_unify(c: &mut Criterion) {
    let a = FeatureStructure::from_pairs([
        ("displ_const", FeatureValue::atom("+")),
        ("displ_const_index", FeatureValue::Var(VarId(0))),
    ]);
    let b = FeatureStructure::from_pairs([
        ("displ_const", FeatureValue::Var(VarId(1))),
        ("index", FeatureValue::atom("i1")),
    ]);
    let env = Bindings::new();
    c.bench_function("unify_small", |bench| {
        bench.iter(|| unify(black_box(&a), black_box(&b), &env))
    });
}

fn bench_parse(c: &mut Criterion) {
    let grammar = load_grammar(EXTRAPOSITION).unwrap();
    let tokens = tokenize("A man arrived who knew Mary");
    let limits = ParseLimits::default();
    c.bench_function("parse_extraposed_clause", |bench| {
        bench.iter(|| parse(&grammar, black_box(&tokens), &limits))
    });
}

fn bench_sample(c: &mut Criterion) {
    let ftag = load_grammar(PPX).unwrap();
    let mc = load_mc_grammar(PPX_MC).unwrap();
    c.bench_function("sample_ftag_len8", |bench| {
        bench.iter(|| language_sample(SampleSource::Ftag(black_box(&ftag)), 8))
    });
    c.bench_function("sample_mc_len8", |bench| {
        bench.iter(|| language_sample(SampleSource::Mc(black_box(&mc)), 8))
    });
}

criterion_group!(benches, bench_unify, bench_parse, bench_sample);
criterion_main!(benches);
