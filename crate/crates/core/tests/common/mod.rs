//! A brute-force derivation enumerator shared by the integration tests. It
//! expands attachment choices directly over the grammar with no feature
//! reasoning and nothing shared with the parser's search; replay and
//! finalize alone decide acceptance. Slow but obviously exhaustive, which
//! is the point: the parser is checked against it.

use ftag_core::parse::replay;
use ftag_core::*;
use std::collections::{BTreeMap, BTreeSet, HashMap};

type Options = Vec<(Option<(CompositionRecord, Derivation)>, usize)>;
type Memo = HashMap<(String, usize), Vec<(Derivation, usize)>>;

/// Every accepted derivation of at most `budget` tree instances whose yield
/// has at most `max_len` tokens, grouped by yield.
pub fn oracle_language(
    grammar: &Grammar,
    budget: usize,
    max_len: usize,
) -> BTreeMap<Vec<String>, BTreeSet<Derivation>> {
    let mut memo = Memo::new();
    let mut out: BTreeMap<Vec<String>, BTreeSet<Derivation>> = BTreeMap::new();
    for tree in grammar.trees.values() {
        if tree.kind != TreeKind::Initial || tree.root.label.category != grammar.start {
            continue;
        }
        for (d, _) in complete(grammar, &tree.name, budget, &mut memo) {
            let mut gen = VarGen::new();
            let Ok(derived) = replay(grammar, &d, &mut gen) else {
                continue;
            };
            let Ok(done) = finalize(&derived) else {
                continue;
            };
            let toks = done.tokens();
            if toks.len() <= max_len {
                out.entry(toks).or_default().insert(d);
            }
        }
    }
    out
}

/// All structurally complete derivations rooted at `name` using at most
/// `budget` instances: every substitution site filled, each non-NA interior
/// node taking at most one adjunction. The only pruning mirrors the
/// composer's hard rejections (category mismatch, tree kind, NA, SA), so
/// nothing replay could accept is skipped. Returns each derivation with its
/// instance count.
fn complete(
    grammar: &Grammar,
    name: &str,
    budget: usize,
    memo: &mut Memo,
) -> Vec<(Derivation, usize)> {
    if budget == 0 {
        return Vec::new();
    }
    let key = (name.to_string(), budget);
    if let Some(hit) = memo.get(&key) {
        return hit.clone();
    }
    let rows = expand(grammar, name, budget, memo);
    memo.insert(key, rows.clone());
    rows
}

fn expand(
    grammar: &Grammar,
    name: &str,
    budget: usize,
    memo: &mut Memo,
) -> Vec<(Derivation, usize)> {
    let tree = grammar.tree(name).expect("oracle given unknown tree");
    let mut slots: Vec<Options> = Vec::new();
    for (addr, node) in tree.root.walk() {
        match node.kind {
            NodeKind::Substitution => {
                let mut options: Options = Vec::new();
                for cand in grammar.trees.values() {
                    if cand.kind != TreeKind::Initial
                        || cand.root.label.category != node.label.category
                    {
                        continue;
                    }
                    for (d, used) in complete(grammar, &cand.name, budget - 1, memo) {
                        let rec = CompositionRecord {
                            parent: name.to_string(),
                            op: OpKind::Substitution,
                            address: addr.clone(),
                            child: cand.name.clone(),
                        };
                        options.push((Some((rec, d)), used));
                    }
                }
                slots.push(options);
            }
            NodeKind::Interior => {
                if node.constraint == AdjConstraint::Na {
                    continue;
                }
                let mut options: Options = vec![(None, 0)];
                for cand in grammar.trees.values() {
                    if cand.kind != TreeKind::Auxiliary
                        || cand.root.label.category != node.label.category
                    {
                        continue;
                    }
                    if let AdjConstraint::Sa(allowed) = &node.constraint {
                        if !allowed.contains(&cand.name) {
                            continue;
                        }
                    }
                    for (d, used) in complete(grammar, &cand.name, budget - 1, memo) {
                        let rec = CompositionRecord {
                            parent: name.to_string(),
                            op: OpKind::Adjunction,
                            address: addr.clone(),
                            child: cand.name.clone(),
                        };
                        options.push((Some((rec, d)), used));
                    }
                }
                slots.push(options);
            }
            _ => {}
        }
    }

    let mut combos = Vec::new();
    fill(&slots, budget - 1, &mut Vec::new(), &mut combos);
    combos
        .into_iter()
        .map(|(children, used)| (Derivation::new(name, children), used + 1))
        .collect()
}

/// Cross product of the per-slot options, kept within `budget` instances.
fn fill(
    slots: &[Options],
    budget: usize,
    acc: &mut Vec<(CompositionRecord, Derivation)>,
    out: &mut Vec<(Vec<(CompositionRecord, Derivation)>, usize)>,
) {
    let Some((head, rest)) = slots.split_first() else {
        out.push((acc.clone(), 0));
        return;
    };
    for (choice, used) in head {
        if *used > budget {
            continue;
        }
        if let Some(pair) = choice {
            acc.push(pair.clone());
        }
        let start = out.len();
        fill(rest, budget - used, acc, out);
        for row in &mut out[start..] {
            row.1 += used;
        }
        if choice.is_some() {
            acc.pop();
        }
    }
}
