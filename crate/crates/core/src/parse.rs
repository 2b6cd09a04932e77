//! Parsing: enumerate every complete derivation of a token sequence.
//!
//! The search runs in two phases. Structural enumeration finds skeleton
//! derivations whose frontier spells the tokens: recursive backtracking over
//! the lexically selected trees, walking each elementary tree and splitting
//! the covered span over its children, with auxiliary trees covering an
//! outer span around the hole their foot passes through. A budget on the
//! total number of tree instances bounds zero-width recursion through empty
//! category trees. Feature replay then rebuilds each skeleton through the
//! composer and keeps those that finalize.
//!
//! A derivation is canonical: substitution records sort before adjunction
//! records, then by address. An adjunction address always names an interior
//! node of the parent elementary tree, so adjunction at a filled
//! substitution site belongs to the argument tree at its root, never to the
//! host; the composer accepts both phrasings, but derivations use one.

use crate::compose::{
    adjoin, finalize, instantiate, substitute, ComposeError, CompositionRecord, DerivedTree,
    FinalTree, FinalizeError, OpKind,
};
use crate::features::VarGen;
use crate::tree::{
    AdjConstraint, ElementaryTree, GornAddress, Grammar, NodeKind, NodeLabel, TreeKind, TreeNode,
};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Lowercases, splits on whitespace and strips trailing punctuation.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|word| {
            let word = word.to_lowercase();
            let word = word.trim_end_matches(['?', '.', '!', ',']);
            (!word.is_empty()).then(|| word.to_string())
        })
        .collect()
}

fn counts(words: &[String]) -> BTreeMap<&str, usize> {
    let mut out = BTreeMap::new();
    for w in words {
        *out.entry(w.as_str()).or_insert(0) += 1;
    }
    out
}

fn anchors_fit(tree: &ElementaryTree, available: &BTreeMap<&str, usize>) -> bool {
    let anchors = tree.anchors();
    let mut need: BTreeMap<&str, usize> = BTreeMap::new();
    for a in anchors {
        *need.entry(a).or_insert(0) += 1;
    }
    need.iter()
        .all(|(w, n)| available.get(w).copied().unwrap_or(0) >= *n)
}

/// Names of trees whose anchors all occur in the tokens, multiset-wise.
/// Anchorless trees always pass.
pub fn select_trees(grammar: &Grammar, tokens: &[String]) -> BTreeSet<String> {
    let available = counts(tokens);
    grammar
        .trees
        .values()
        .filter(|t| anchors_fit(t, &available))
        .map(|t| t.name.clone())
        .collect()
}

/// A derivation: the root elementary tree and, per attached tree, the
/// composition record and the child's own derivation. Children are kept in
/// canonical order, so equal derivations compare equal.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct Derivation {
    pub tree: String,
    pub children: Vec<(CompositionRecord, Derivation)>,
}

impl Derivation {
    /// Builds a derivation node, putting `children` into canonical order.
    pub fn new(tree: &str, mut children: Vec<(CompositionRecord, Derivation)>) -> Self {
        children.sort();
        Derivation {
            tree: tree.to_string(),
            children,
        }
    }

    /// All composition records, parents before children.
    pub fn records(&self) -> Vec<&CompositionRecord> {
        let mut out = Vec::new();
        fn go<'a>(d: &'a Derivation, out: &mut Vec<&'a CompositionRecord>) {
            for (rec, child) in &d.children {
                out.push(rec);
                go(child, out);
            }
        }
        go(self, &mut out);
        out
    }

    /// Number of elementary tree instances used.
    pub fn size(&self) -> usize {
        1 + self
            .children
            .iter()
            .map(|(_, c)| c.size())
            .sum::<usize>()
    }
}

impl fmt::Display for Derivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn go(d: &Derivation, depth: usize, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            for (rec, child) in &d.children {
                writeln!(f, "{}{rec}", "  ".repeat(depth))?;
                go(child, depth + 1, f)?;
            }
            Ok(())
        }
        writeln!(f, "{}", self.tree)?;
        go(self, 1, f)
    }
}

/// Search limits. `max_trees` bounds elementary tree instances per
/// derivation (default 2 x tokens + 2); `max_results` truncates the
/// returned list.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct ParseLimits {
    pub max_trees: Option<usize>,
    pub max_results: Option<usize>,
}

/// Result of a parse. `limit_hit` means the tree budget cut off at least
/// one search branch, so a larger `max_trees` might find more; it
/// distinguishes a bounded search from a plain rejection.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ParseResult {
    pub sentence: Vec<String>,
    pub derivations: Vec<(Derivation, FinalTree)>,
    pub limit_hit: bool,
    pub truncated: bool,
}

/// Rebuilds a derivation through the composer: substitutions first, then
/// adjunctions deepest address first, so every recorded elementary address
/// is still valid when used.
pub fn replay(
    grammar: &Grammar,
    derivation: &Derivation,
    gen: &mut VarGen,
) -> Result<DerivedTree, ComposeError> {
    let tree = grammar
        .tree(&derivation.tree)
        .unwrap_or_else(|| panic!("derivation names unknown tree {}", derivation.tree));
    let mut out = instantiate(tree, gen);
    let mut subs: Vec<&(CompositionRecord, Derivation)> = Vec::new();
    let mut adjs: Vec<&(CompositionRecord, Derivation)> = Vec::new();
    for pair in &derivation.children {
        match pair.0.op {
            OpKind::Substitution => subs.push(pair),
            OpKind::Adjunction => adjs.push(pair),
        }
    }
    adjs.sort_by(|a, b| {
        (b.0.address.depth(), &b.0.address).cmp(&(a.0.address.depth(), &a.0.address))
    });
    for (rec, child) in subs {
        let arg = replay(grammar, child, gen)?;
        out = substitute(&out, &rec.address, &arg)?;
    }
    for (rec, child) in adjs {
        let aux = replay(grammar, child, gen)?;
        out = adjoin(&out, &rec.address, &aux)?;
    }
    Ok(out)
}

/// Parses tokens against the grammar, returning every derivation whose
/// finalized tree yields exactly the tokens, in canonical order.
pub fn parse(grammar: &Grammar, tokens: &[String], limits: &ParseLimits) -> ParseResult {
    let budget = limits.max_trees.unwrap_or(2 * tokens.len() + 2);
    let mut searcher = Searcher::new(grammar, tokens, false);
    let skeletons = searcher.skeletons(budget);

    let mut derivations = Vec::new();
    for d in skeletons {
        let mut gen = VarGen::new();
        let Ok(t) = replay(grammar, &d, &mut gen) else {
            continue;
        };
        let Ok(done) = finalize(&t) else {
            continue;
        };
        debug_assert_eq!(done.tokens(), tokens, "skeleton yield out of step");
        derivations.push((d, done));
    }
    let truncated = limits
        .max_results
        .map_or(false, |m| derivations.len() > m);
    if let Some(m) = limits.max_results {
        derivations.truncate(m);
    }
    ParseResult {
        sentence: tokens.to_vec(),
        derivations,
        limit_hit: searcher.limit_hit,
        truncated,
    }
}

/// One finding from `explain`: where a near-miss derivation failed and why.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct Diagnostic {
    pub address: GornAddress,
    pub label: Option<NodeLabel>,
    pub reason: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.label {
            Some(label) => write!(f, "at {} ({}): {}", label, self.address, self.reason),
            None => write!(f, "{}", self.reason),
        }
    }
}

/// Reports why derivations of the tokens fail: structural skeletons (with
/// obligatory adjunction relaxed) that the composer or finalization then
/// rejects, each with the failing node and reason. With no skeletons at
/// all, reports "no candidate trees".
pub fn explain(grammar: &Grammar, tokens: &[String]) -> Vec<Diagnostic> {
    let budget = 2 * tokens.len() + 2;
    let mut searcher = Searcher::new(grammar, tokens, true);
    let skeletons = searcher.skeletons(budget);
    if skeletons.is_empty() {
        return vec![Diagnostic {
            address: GornAddress::root(),
            label: None,
            reason: "no candidate trees".into(),
        }];
    }
    let mut out = BTreeSet::new();
    for d in &skeletons {
        let mut gen = VarGen::new();
        match replay(grammar, d, &mut gen) {
            Err(ComposeError::Rejected {
                address,
                label,
                reason,
            }) => {
                out.insert(Diagnostic {
                    address,
                    label: Some(label),
                    reason: reason.to_string(),
                });
            }
            Err(ComposeError::BadTarget(address)) => {
                out.insert(Diagnostic {
                    address,
                    label: None,
                    reason: "no node at recorded address".into(),
                });
            }
            Ok(t) => match finalize(&t) {
                Err(FinalizeError::Clash {
                    address,
                    label,
                    clash,
                }) => {
                    out.insert(Diagnostic {
                        address,
                        label: Some(label),
                        reason: format!("clash on {}: {}", clash.attribute, clash),
                    });
                }
                Err(FinalizeError::Pending {
                    address,
                    label,
                    missing,
                }) => {
                    out.insert(Diagnostic {
                        address,
                        label: Some(label),
                        reason: missing,
                    });
                }
                Ok(_) => {}
            },
        }
    }
    out.into_iter().collect()
}

// ------------------------------------------------------- skeleton search

type Cover = (Vec<(CompositionRecord, Derivation)>, usize);

struct Searcher<'a> {
    tokens: &'a [String],
    start: &'a str,
    inits: BTreeMap<String, Vec<&'a ElementaryTree>>,
    auxs: BTreeMap<String, Vec<&'a ElementaryTree>>,
    relax_oa: bool,
    limit_hit: bool,
}

impl<'a> Searcher<'a> {
    fn new(grammar: &'a Grammar, tokens: &'a [String], relax_oa: bool) -> Self {
        let available = counts(tokens);
        let mut inits: BTreeMap<String, Vec<&ElementaryTree>> = BTreeMap::new();
        let mut auxs: BTreeMap<String, Vec<&ElementaryTree>> = BTreeMap::new();
        for tree in grammar.trees.values() {
            if !anchors_fit(tree, &available) {
                continue;
            }
            let cat = tree.root.label.category.clone();
            match tree.kind {
                TreeKind::Initial => inits.entry(cat).or_default().push(tree),
                TreeKind::Auxiliary => auxs.entry(cat).or_default().push(tree),
            }
        }
        Searcher {
            tokens,
            start: &grammar.start,
            inits,
            auxs,
            relax_oa,
            limit_hit: false,
        }
    }

    fn skeletons(&mut self, budget: usize) -> BTreeSet<Derivation> {
        let starts: Vec<&ElementaryTree> = self
            .inits
            .get(self.start)
            .map(|v| v.clone())
            .unwrap_or_default();
        let mut out = BTreeSet::new();
        for tree in starts {
            for (d, _) in self.derive_initial(tree, 0, self.tokens.len(), budget) {
                out.insert(d);
            }
        }
        out
    }

    fn derive_initial(
        &mut self,
        tree: &'a ElementaryTree,
        i: usize,
        j: usize,
        budget: usize,
    ) -> Vec<(Derivation, usize)> {
        if budget == 0 {
            self.limit_hit = true;
            return Vec::new();
        }
        self.cover_node(tree, &tree.root, GornAddress::root(), i, j, None, budget - 1)
            .into_iter()
            .map(|(children, used)| (Derivation::new(&tree.name, children), used + 1))
            .collect()
    }

    fn derive_aux(
        &mut self,
        tree: &'a ElementaryTree,
        i: usize,
        j: usize,
        hole: (usize, usize),
        budget: usize,
    ) -> Vec<(Derivation, usize)> {
        if budget == 0 {
            self.limit_hit = true;
            return Vec::new();
        }
        self.cover_node(
            tree,
            &tree.root,
            GornAddress::root(),
            i,
            j,
            Some(hole),
            budget - 1,
        )
        .into_iter()
        .map(|(children, used)| (Derivation::new(&tree.name, children), used + 1))
        .collect()
    }

    /// True when the anchors of `tree` fit the tokens of [i, j) with the
    /// subrange `skip` removed. A cheap multiset precheck that prunes
    /// hopeless candidates before any recursion.
    fn span_fits(
        &self,
        tree: &ElementaryTree,
        i: usize,
        j: usize,
        skip: Option<(usize, usize)>,
    ) -> bool {
        let mut avail: BTreeMap<&str, usize> = BTreeMap::new();
        for (k, t) in self.tokens[i..j].iter().enumerate() {
            let pos = i + k;
            if let Some((a, b)) = skip {
                if pos >= a && pos < b {
                    continue;
                }
            }
            *avail.entry(t.as_str()).or_default() += 1;
        }
        let mut need: BTreeMap<&str, usize> = BTreeMap::new();
        for w in tree.anchors() {
            *need.entry(w).or_default() += 1;
        }
        need.iter().all(|(w, n)| avail.get(w).copied().unwrap_or(0) >= *n)
    }

    /// Covers span [i, j) with the elementary subtree at `node`, optionally
    /// wrapping one adjunction around it. The node's own material is
    /// covered first, over a candidate inner span; auxiliaries whose
    /// anchors cannot fit the remainder are pruned before recursion.
    /// `hole` is the span the enclosing auxiliary's foot must pass through.
    #[allow(clippy::too_many_arguments)]
    fn cover_node(
        &mut self,
        tree: &'a ElementaryTree,
        node: &'a TreeNode,
        addr: GornAddress,
        i: usize,
        j: usize,
        hole: Option<(usize, usize)>,
        budget: usize,
    ) -> Vec<Cover> {
        let adjoinable =
            node.kind == NodeKind::Interior && node.constraint != AdjConstraint::Na;
        if !adjoinable {
            return self.cover_content(tree, node, addr, i, j, hole, budget);
        }
        let oa_blocked = node.constraint == AdjConstraint::Oa && !self.relax_oa;
        let mut out = Vec::new();
        for hk in i..=j {
            for hl in hk..=j {
                let inners =
                    self.cover_content(tree, node, addr.clone(), hk, hl, hole, budget);
                if inners.is_empty() {
                    continue;
                }
                if hk == i && hl == j && !oa_blocked {
                    out.extend(inners.iter().cloned());
                }
                let cands: Vec<&ElementaryTree> = self
                    .auxs
                    .get(&node.label.category)
                    .map(|v| v.clone())
                    .unwrap_or_default();
                for aux in cands {
                    if let AdjConstraint::Sa(allowed) = &node.constraint {
                        if !allowed.contains(&aux.name) {
                            continue;
                        }
                    }
                    if !self.span_fits(aux, i, j, Some((hk, hl))) {
                        continue;
                    }
                    for (inner_ops, inner_used) in &inners {
                        for (aux_d, aux_used) in
                            self.derive_aux(aux, i, j, (hk, hl), budget - inner_used)
                        {
                            let rec = CompositionRecord {
                                parent: tree.name.clone(),
                                op: OpKind::Adjunction,
                                address: addr.clone(),
                                child: aux_d.tree.clone(),
                            };
                            let mut ops = inner_ops.clone();
                            ops.push((rec, aux_d));
                            out.push((ops, inner_used + aux_used));
                        }
                    }
                }
            }
        }
        out
    }

    fn cover_content(
        &mut self,
        tree: &'a ElementaryTree,
        node: &'a TreeNode,
        addr: GornAddress,
        i: usize,
        j: usize,
        hole: Option<(usize, usize)>,
        budget: usize,
    ) -> Vec<Cover> {
        let hole_overlaps = |a: usize, b: usize| match hole {
            Some((hk, hl)) => a.max(hk) < b.min(hl),
            None => false,
        };
        match &node.kind {
            NodeKind::Anchor(word) => {
                if j == i + 1 && self.tokens[i] == *word && !hole_overlaps(i, j) {
                    vec![(Vec::new(), 0)]
                } else {
                    Vec::new()
                }
            }
            NodeKind::Epsilon => {
                if i == j {
                    vec![(Vec::new(), 0)]
                } else {
                    Vec::new()
                }
            }
            NodeKind::Foot => {
                if hole == Some((i, j)) {
                    vec![(Vec::new(), 0)]
                } else {
                    Vec::new()
                }
            }
            NodeKind::Substitution => {
                if hole_overlaps(i, j) {
                    return Vec::new();
                }
                let cands: Vec<&ElementaryTree> = self
                    .inits
                    .get(&node.label.category)
                    .map(|v| v.clone())
                    .unwrap_or_default();
                let mut out = Vec::new();
                for cand in cands {
                    if !self.span_fits(cand, i, j, None) {
                        continue;
                    }
                    for (d, used) in self.derive_initial(cand, i, j, budget) {
                        let rec = CompositionRecord {
                            parent: tree.name.clone(),
                            op: OpKind::Substitution,
                            address: addr.clone(),
                            child: d.tree.clone(),
                        };
                        out.push((vec![(rec, d)], used));
                    }
                }
                out
            }
            NodeKind::Interior => self.cover_children(tree, node, &addr, 0, i, j, hole, budget),
        }
    }

    /// Splits [i, j) over the children of `node` starting at child index
    /// `from` (0-based here; addresses are 1-based).
    #[allow(clippy::too_many_arguments)]
    fn cover_children(
        &mut self,
        tree: &'a ElementaryTree,
        node: &'a TreeNode,
        addr: &GornAddress,
        from: usize,
        i: usize,
        j: usize,
        hole: Option<(usize, usize)>,
        budget: usize,
    ) -> Vec<Cover> {
        let Some(child) = node.children.get(from) else {
            return if i == j { vec![(Vec::new(), 0)] } else { Vec::new() };
        };
        let mut out = Vec::new();
        for split in i..=j {
            let firsts = self.cover_node(
                tree,
                child,
                addr.child(from + 1),
                i,
                split,
                hole,
                budget,
            );
            for (ops1, used1) in firsts {
                for (ops2, used2) in self.cover_children(
                    tree,
                    node,
                    addr,
                    from + 1,
                    split,
                    j,
                    hole,
                    budget - used1,
                ) {
                    let mut ops = ops1.clone();
                    ops.extend(ops2);
                    out.push((ops, used1 + used2));
                }
            }
        }
        out
    }
}
